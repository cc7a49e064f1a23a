//! Competition ranking, rank combination, and ranking stability.
//!
//! Teams are ranked per metric with competition ties (tied teams share the
//! best applicable rank, the next distinct team skips: 1, 2, 2, 4), combined
//! by summing constituent ranks, and re-ranked on the sums. Stability is
//! quantified by case-level bootstrap resampling; pairwise differences by a
//! one-sided Wilcoxon signed-rank test over per-case means.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Aggregate, EvaluationRun, Metric, MetricRecord, PenaltyScope, PENALTY_FACTOR};
use crate::error::{Error, Result};
use crate::stats::{kendall_tau_b, wilcoxon_signed_rank_one_sided, SIGNIFICANCE_TEST_ID};
use crate::subset::SubsetFilter;
use crate::volume::TissueLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Metric {
    pub fn direction(self) -> Direction {
        if self.higher_is_better() {
            Direction::HigherBetter
        } else {
            Direction::LowerBetter
        }
    }
}

/// How rank-sum ties are presented in the final ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieMode {
    /// Tied teams share the best applicable rank.
    Shared,
    /// Ties break by mean constituent rank, then lexicographic team id; the
    /// break is annotated via the `tied` flag.
    Broken,
}

impl fmt::Display for TieMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieMode::Shared => write!(f, "shared"),
            TieMode::Broken => write!(f, "broken"),
        }
    }
}

impl TieMode {
    pub fn parse(token: &str) -> Option<TieMode> {
        match token.trim().to_ascii_lowercase().as_str() {
            "shared" => Some(TieMode::Shared),
            "broken" => Some(TieMode::Broken),
            _ => None,
        }
    }
}

/// Competition ranks from per-team aggregate values.
pub fn rank_by_metric(
    values: &BTreeMap<String, f64>,
    direction: Direction,
) -> Result<BTreeMap<String, usize>> {
    rank_by_metric_with_precision(values, direction, None)
}

/// Like [`rank_by_metric`] with values rounded to `decimals` places before
/// comparison, so that display-rounded inputs tie where the table ties.
pub fn rank_by_metric_with_precision(
    values: &BTreeMap<String, f64>,
    direction: Direction,
    decimals: Option<u32>,
) -> Result<BTreeMap<String, usize>> {
    if values.is_empty() {
        return Err(Error::Ranking("cannot rank an empty team set".into()));
    }
    for (team, v) in values {
        if !v.is_finite() {
            return Err(Error::Ranking(format!(
                "non-finite aggregate {v} for team {team:?}; penalties must be resolved before ranking"
            )));
        }
    }
    let quantize = |v: f64| match decimals {
        Some(d) => {
            let scale = 10f64.powi(d as i32);
            (v * scale).round() / scale
        }
        None => v,
    };
    let mut ranks = BTreeMap::new();
    for (team, &value) in values {
        let v = quantize(value);
        let better = values
            .values()
            .filter(|&&other| {
                let o = quantize(other);
                match direction {
                    Direction::HigherBetter => o > v,
                    Direction::LowerBetter => o < v,
                }
            })
            .count();
        ranks.insert(team.clone(), better + 1);
    }
    Ok(ranks)
}

/// One ranked metric feeding a combined ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub name: String,
    /// Aggregate values per team; may be empty when only ranks are known.
    pub values: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
}

impl Constituent {
    pub fn from_ranks(name: &str, ranks: BTreeMap<String, usize>) -> Constituent {
        Constituent { name: name.to_string(), values: BTreeMap::new(), ranks }
    }

    pub fn from_aggregates(
        name: &str,
        aggregates: &BTreeMap<String, Aggregate>,
        direction: Direction,
    ) -> Result<Constituent> {
        let values: BTreeMap<String, f64> =
            aggregates.iter().map(|(t, a)| (t.clone(), a.mean)).collect();
        let ranks = rank_by_metric(&values, direction)?;
        Ok(Constituent { name: name.to_string(), values, ranks })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeamRanking {
    pub team_id: String,
    pub metric_values: BTreeMap<String, f64>,
    pub metric_ranks: BTreeMap<String, usize>,
    /// Sum of constituent ranks.
    pub combined_score: usize,
    pub final_rank: usize,
    /// True when this team's combined score ties another team's.
    pub tied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub subset: String,
    /// The filter that produced `subset`; kept so reports can re-aggregate.
    pub filter: SubsetFilter,
    pub tie_mode: TieMode,
    pub constituents: Vec<String>,
    pub teams: Vec<TeamRanking>,
}

impl RankingTable {
    pub fn team(&self, team_id: &str) -> Option<&TeamRanking> {
        self.teams.iter().find(|t| t.team_id == team_id)
    }

    pub fn final_ranks(&self) -> BTreeMap<String, usize> {
        self.teams.iter().map(|t| (t.team_id.clone(), t.final_rank)).collect()
    }

    /// Structural competition-ranking validity: rank 1 exists and every
    /// team's rank is one plus the number of strictly better combined scores.
    pub fn is_valid_competition_ranking(&self) -> bool {
        match self.tie_mode {
            TieMode::Shared => self.teams.iter().all(|t| {
                let better =
                    self.teams.iter().filter(|o| o.combined_score < t.combined_score).count();
                t.final_rank == better + 1
            }),
            TieMode::Broken => {
                let mut ranks: Vec<usize> = self.teams.iter().map(|t| t.final_rank).collect();
                ranks.sort_unstable();
                ranks == (1..=self.teams.len()).collect::<Vec<_>>()
            }
        }
    }
}

/// Sums constituent ranks per team and re-ranks the sums.
pub fn combine_rankings(
    constituents: &[Constituent],
    tie_mode: TieMode,
    subset: &str,
    filter: &SubsetFilter,
) -> Result<RankingTable> {
    let Some(first) = constituents.first() else {
        return Err(Error::Ranking("combined ranking needs at least one constituent".into()));
    };
    let team_set: Vec<&String> = first.ranks.keys().collect();
    for c in constituents {
        let keys: Vec<&String> = c.ranks.keys().collect();
        if keys != team_set {
            return Err(Error::Ranking(format!(
                "constituent {:?} covers a different team set than {:?}",
                c.name, first.name
            )));
        }
    }

    let mut teams: Vec<TeamRanking> = team_set
        .iter()
        .map(|&team| {
            let mut metric_values = BTreeMap::new();
            let mut metric_ranks = BTreeMap::new();
            let mut combined = 0usize;
            for c in constituents {
                if let Some(v) = c.values.get(team) {
                    metric_values.insert(c.name.clone(), *v);
                }
                let rank = c.ranks[team];
                metric_ranks.insert(c.name.clone(), rank);
                combined += rank;
            }
            TeamRanking {
                team_id: team.clone(),
                metric_values,
                metric_ranks,
                combined_score: combined,
                final_rank: 0,
                tied: false,
            }
        })
        .collect();

    let scores: Vec<usize> = teams.iter().map(|t| t.combined_score).collect();
    for team in teams.iter_mut() {
        team.tied = scores.iter().filter(|&&s| s == team.combined_score).count() > 1;
    }
    match tie_mode {
        TieMode::Shared => {
            for team in teams.iter_mut() {
                team.final_rank =
                    1 + scores.iter().filter(|&&s| s < team.combined_score).count();
            }
        }
        TieMode::Broken => {
            let k = constituents.len() as f64;
            let mut order: Vec<usize> = (0..teams.len()).collect();
            order.sort_by(|&a, &b| {
                let mean_a = teams[a].combined_score as f64 / k;
                let mean_b = teams[b].combined_score as f64 / k;
                teams[a]
                    .combined_score
                    .cmp(&teams[b].combined_score)
                    .then(mean_a.partial_cmp(&mean_b).unwrap())
                    .then(teams[a].team_id.cmp(&teams[b].team_id))
            });
            for (pos, &idx) in order.iter().enumerate() {
                teams[idx].final_rank = pos + 1;
            }
        }
    }
    teams.sort_by(|a, b| a.final_rank.cmp(&b.final_rank).then(a.team_id.cmp(&b.team_id)));

    Ok(RankingTable {
        subset: subset.to_string(),
        filter: filter.clone(),
        tie_mode,
        constituents: constituents.iter().map(|c| c.name.clone()).collect(),
        teams,
    })
}

fn metric_constituent(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    metric: Metric,
) -> Result<Constituent> {
    let aggregates = crate::engine::aggregate(run, subset, metric)?;
    Constituent::from_aggregates(metric.name(), &aggregates, metric.direction())
}

/// Combined ranking over DSC, HD95, and VS.
pub fn global_ranking(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    tie_mode: TieMode,
) -> Result<RankingTable> {
    let constituents = vec![
        metric_constituent(run, subset, Metric::Dsc)?,
        metric_constituent(run, subset, Metric::Hd95)?,
        metric_constituent(run, subset, Metric::Vs)?,
    ];
    combine_rankings(&constituents, tie_mode, &subset.describe(), subset)
}

/// Overall topology ranking: the ranking of the sum of the three per-dimension
/// BNE rankings.
pub fn bne_ranking(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    tie_mode: TieMode,
) -> Result<RankingTable> {
    let constituents = vec![
        metric_constituent(run, subset, Metric::Bne0)?,
        metric_constituent(run, subset, Metric::Bne1)?,
        metric_constituent(run, subset, Metric::Bne2)?,
    ];
    combine_rankings(&constituents, tie_mode, &subset.describe(), subset)
}

/// Building blocks of the topology-integrative ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TirPart {
    Dsc,
    Hd95,
    Vs,
    /// Final rank of the overall BNE ranking as a constituent.
    BneOverall,
}

pub const TIR_DEFAULT_PARTS: [TirPart; 4] =
    [TirPart::Dsc, TirPart::Hd95, TirPart::Vs, TirPart::BneOverall];

/// Topology-integrative ranking with a configurable composition.
pub fn topology_integrative_ranking_with(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    tie_mode: TieMode,
    parts: &[TirPart],
) -> Result<RankingTable> {
    let mut constituents = Vec::with_capacity(parts.len());
    for part in parts {
        constituents.push(match part {
            TirPart::Dsc => metric_constituent(run, subset, Metric::Dsc)?,
            TirPart::Hd95 => metric_constituent(run, subset, Metric::Hd95)?,
            TirPart::Vs => metric_constituent(run, subset, Metric::Vs)?,
            TirPart::BneOverall => {
                let bne = bne_ranking(run, subset, tie_mode)?;
                let values = bne
                    .teams
                    .iter()
                    .map(|t| (t.team_id.clone(), t.combined_score as f64))
                    .collect();
                Constituent { name: "BNE".to_string(), values, ranks: bne.final_ranks() }
            }
        });
    }
    combine_rankings(&constituents, tie_mode, &subset.describe(), subset)
}

/// Default topology-integrative ranking: DSC, HD95, VS, plus the overall BNE
/// rank.
pub fn topology_integrative_ranking(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    tie_mode: TieMode,
) -> Result<RankingTable> {
    topology_integrative_ranking_with(run, subset, tie_mode, &TIR_DEFAULT_PARTS)
}

/// One BNE ranking per scored tissue, on top of the base case filter.
pub fn per_tissue_bne_rankings(
    run: &EvaluationRun,
    base: &SubsetFilter,
    tie_mode: TieMode,
) -> Result<Vec<(TissueLabel, RankingTable)>> {
    TissueLabel::SCORED
        .iter()
        .map(|&tissue| Ok((tissue, bne_ranking(run, &base.and_tissue(tissue), tie_mode)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankingKind {
    Global,
    Bne,
    Tir,
}

impl RankingKind {
    fn compute(
        self,
        run: &EvaluationRun,
        subset: &SubsetFilter,
        tie_mode: TieMode,
    ) -> Result<RankingTable> {
        match self {
            RankingKind::Global => global_ranking(run, subset, tie_mode),
            RankingKind::Bne => bne_ranking(run, subset, tie_mode),
            RankingKind::Tir => topology_integrative_ranking(run, subset, tie_mode),
        }
    }
}

/// Bootstrap output: how often each team lands on each rank, and how far each
/// resample ranking sits from the full ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub subset: String,
    pub kind: RankingKind,
    pub resamples: usize,
    pub seed: u64,
    pub rng_id: String,
    /// Teams ordered by the full ranking (rank, then id).
    pub teams: Vec<String>,
    pub full_ranks: Vec<usize>,
    /// `rank_frequencies[t][r]` = fraction of resamples placing team `t` at
    /// rank `r + 1`.
    pub rank_frequencies: Vec<Vec<f64>>,
    /// Kendall tau-b between each resample's ranks and the full ranks.
    pub kendall_taus: Vec<f64>,
}

/// Re-resolves pool-relative penalties inside one bootstrap resample.
/// Falls back to the full-run penalty value when a resample pool has no
/// finite entry in scope.
fn reresolve_penalties(records: &mut [MetricRecord], scope: PenaltyScope) {
    let max_finite = |it: &mut dyn Iterator<Item = f64>| -> Option<f64> {
        it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m| m.max(v))))
    };
    let hd95_max = |records: &[MetricRecord], tissue: TissueLabel| -> Option<f64> {
        let mut it = records
            .iter()
            .filter(|r| !r.flags.penalized_hd95)
            .filter(|r| scope == PenaltyScope::Global || r.tissue == tissue)
            .filter_map(|r| r.hd95_mm);
        max_finite(&mut it)
    };
    let bne_max = |records: &[MetricRecord], tissue: TissueLabel, k: usize| -> Option<f64> {
        let mut it = records
            .iter()
            .filter(|r| !r.flags.penalized_bne && r.tissue == tissue)
            .filter_map(|r| r.bne.map(|b| b.component(k)));
        max_finite(&mut it)
    };
    let snapshot = records.to_vec();
    for record in records.iter_mut() {
        if record.flags.penalized_hd95 {
            if let Some(max) = hd95_max(&snapshot, record.tissue) {
                record.hd95_mm = Some(PENALTY_FACTOR * max);
            }
        }
        if record.flags.penalized_bne {
            if let Some(bne) = record.bne.as_mut() {
                for k in 0..3 {
                    if let Some(max) = bne_max(&snapshot, record.tissue, k) {
                        match k {
                            0 => bne.e0 = PENALTY_FACTOR * max,
                            1 => bne.e1 = PENALTY_FACTOR * max,
                            _ => bne.e2 = PENALTY_FACTOR * max,
                        }
                    }
                }
            }
        }
    }
}

/// Case-level bootstrap of a ranking. Each resample draws cases with
/// replacement, re-resolves penalties within the resample, and recomputes the
/// ranking; the generator stream is derived from `(seed, resample index)`, so
/// output is schedule-independent and deterministic for a fixed seed.
pub fn bootstrap_stability(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    kind: RankingKind,
    resamples: usize,
    seed: u64,
    tie_mode: TieMode,
) -> Result<StabilityReport> {
    if resamples == 0 {
        return Err(Error::Stability("resample count must be >= 1".into()));
    }
    let case_ids: Vec<&str> = run
        .cases
        .iter()
        .filter(|c| subset.matches_case(c))
        .map(|c| c.case_id.as_str())
        .collect();
    if case_ids.len() < 2 {
        return Err(Error::Stability(format!(
            "subset {:?} selects {} case(s); bootstrap needs at least 2",
            subset.describe(),
            case_ids.len()
        )));
    }

    let full = kind.compute(run, subset, tie_mode)?;
    let teams: Vec<String> = full.teams.iter().map(|t| t.team_id.clone()).collect();
    let full_ranks: Vec<usize> = full.teams.iter().map(|t| t.final_rank).collect();
    let team_count = teams.len();

    let mut records_by_case: HashMap<&str, Vec<&MetricRecord>> = HashMap::new();
    for record in &run.records {
        records_by_case.entry(record.case_id.as_str()).or_default().push(record);
    }

    let mut rank_counts = vec![vec![0usize; team_count]; team_count];
    let mut kendall_taus = Vec::with_capacity(resamples);

    for resample in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(resample as u64);
        let mut drawn: Vec<&str> = (0..case_ids.len())
            .map(|_| case_ids[rng.random_range(0..case_ids.len())])
            .collect();
        drawn.sort_unstable();

        let mut records: Vec<MetricRecord> = Vec::new();
        for case in &drawn {
            if let Some(case_records) = records_by_case.get(case) {
                records.extend(case_records.iter().map(|&r| r.clone()));
            }
        }
        reresolve_penalties(&mut records, run.config.penalty.hd95_scope);

        let resample_run = EvaluationRun {
            cases: run.cases.clone(),
            teams: run.teams.clone(),
            records,
            config: run.config.clone(),
            provenance: run.provenance.clone(),
            notes: Vec::new(),
        };
        let table = kind.compute(&resample_run, subset, tie_mode)?;
        let ranks = table.final_ranks();
        let mut resample_ranks = Vec::with_capacity(team_count);
        for (t, team) in teams.iter().enumerate() {
            let rank = *ranks.get(team).ok_or_else(|| {
                Error::Stability(format!("team {team:?} missing from resample ranking"))
            })?;
            rank_counts[t][rank - 1] += 1;
            resample_ranks.push(rank as f64);
        }
        let full_as_f64: Vec<f64> = full_ranks.iter().map(|&r| r as f64).collect();
        kendall_taus.push(kendall_tau_b(&resample_ranks, &full_as_f64));
    }

    let rank_frequencies = rank_counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / resamples as f64).collect())
        .collect();
    Ok(StabilityReport {
        subset: subset.describe(),
        kind,
        resamples,
        seed,
        rng_id: crate::engine::BOOTSTRAP_RNG_ID.to_string(),
        teams,
        full_ranks,
        rank_frequencies,
        kendall_taus,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub significant: bool,
    pub p_value: f64,
    pub n_pairs: usize,
    /// All paired differences were zero; reported as not significant.
    pub degenerate: bool,
    pub test: String,
}

/// One-sided test of "team_a outperforms team_b" on paired per-case mean
/// metric values.
pub fn pairwise_significance(
    run: &EvaluationRun,
    metric: Metric,
    team_a: &str,
    team_b: &str,
    alpha: f64,
) -> Result<SignificanceResult> {
    let per_case_mean = |team: &str| -> Result<BTreeMap<&str, f64>> {
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for record in run.records.iter().filter(|r| r.team_id == team) {
            let value = record.value(metric).ok_or_else(|| {
                Error::Policy(format!(
                    "{} unresolved for team {team:?}; apply penalties before testing",
                    metric.name()
                ))
            })?;
            let entry = sums.entry(record.case_id.as_str()).or_insert((0.0, 0));
            entry.0 += value;
            entry.1 += 1;
        }
        Ok(sums.into_iter().map(|(case, (sum, n))| (case, sum / n as f64)).collect())
    };
    let a = per_case_mean(team_a)?;
    let b = per_case_mean(team_b)?;
    if a.is_empty() {
        return Err(Error::Ranking(format!("no records for team {team_a:?}")));
    }
    let a_cases: Vec<&&str> = a.keys().collect();
    let b_cases: Vec<&&str> = b.keys().collect();
    if a_cases != b_cases {
        return Err(Error::Ranking(format!(
            "teams {team_a:?} and {team_b:?} were not evaluated on identical case sets"
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .map(|(case, &va)| {
            let vb = b[case];
            match metric.direction() {
                Direction::HigherBetter => va - vb,
                Direction::LowerBetter => vb - va,
            }
        })
        .collect();
    match wilcoxon_signed_rank_one_sided(&diffs) {
        Ok(outcome) => Ok(SignificanceResult {
            significant: outcome.p_value <= alpha,
            p_value: outcome.p_value,
            n_pairs: outcome.n_used,
            degenerate: false,
            test: SIGNIFICANCE_TEST_ID.to_string(),
        }),
        Err(Error::Degenerate(_)) => Ok(SignificanceResult {
            significant: false,
            p_value: 1.0,
            n_pairs: diffs.len(),
            degenerate: true,
            test: SIGNIFICANCE_TEST_ID.to_string(),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(t, v)| (t.to_string(), *v)).collect()
    }

    #[test]
    fn higher_better_ranks() {
        let ranks =
            rank_by_metric(&values(&[("a", 0.9), ("b", 0.8), ("c", 0.7)]), Direction::HigherBetter)
                .unwrap();
        assert_eq!(ranks["a"], 1);
        assert_eq!(ranks["b"], 2);
        assert_eq!(ranks["c"], 3);
    }

    #[test]
    fn lower_better_with_competition_tie() {
        let ranks =
            rank_by_metric(&values(&[("a", 2.0), ("b", 3.0), ("c", 2.0)]), Direction::LowerBetter)
                .unwrap();
        assert_eq!(ranks["a"], 1);
        assert_eq!(ranks["c"], 1);
        assert_eq!(ranks["b"], 3);
    }

    #[test]
    fn single_team_ranks_first() {
        let ranks = rank_by_metric(&values(&[("solo", 0.5)]), Direction::HigherBetter).unwrap();
        assert_eq!(ranks["solo"], 1);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = rank_by_metric(&values(&[("a", f64::NAN)]), Direction::HigherBetter);
        assert!(matches!(err, Err(Error::Ranking(_))));
        let err = rank_by_metric(&values(&[("a", f64::INFINITY)]), Direction::LowerBetter);
        assert!(matches!(err, Err(Error::Ranking(_))));
    }

    #[test]
    fn precision_rounding_merges_near_ties() {
        let v = values(&[("a", 0.8161), ("b", 0.8159)]);
        let exact = rank_by_metric(&v, Direction::HigherBetter).unwrap();
        assert_eq!((exact["a"], exact["b"]), (1, 2));
        let rounded =
            rank_by_metric_with_precision(&v, Direction::HigherBetter, Some(3)).unwrap();
        assert_eq!((rounded["a"], rounded["b"]), (1, 1));
    }

    fn ranks_of(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(t, r)| (t.to_string(), *r)).collect()
    }

    #[test]
    fn combine_sums_and_ranks() {
        let constituents = vec![
            Constituent::from_ranks("BNE0", ranks_of(&[("fit", 1), ("blue", 2), ("black", 3)])),
            Constituent::from_ranks("BNE1", ranks_of(&[("fit", 1), ("blue", 2), ("black", 3)])),
            Constituent::from_ranks("BNE2", ranks_of(&[("fit", 2), ("blue", 3), ("black", 4)])),
        ];
        let table = combine_rankings(
            &constituents,
            TieMode::Shared,
            "all",
            &SubsetFilter::everything(),
        )
        .unwrap();
        let fit = table.team("fit").unwrap();
        assert_eq!(fit.combined_score, 4);
        assert_eq!(fit.final_rank, 1);
        assert_eq!(table.team("blue").unwrap().final_rank, 2);
        assert_eq!(table.team("black").unwrap().final_rank, 3);
        assert!(table.is_valid_competition_ranking());
    }

    #[test]
    fn unanimous_input_ranks_pass_through() {
        let r = ranks_of(&[("a", 2), ("b", 1), ("c", 3)]);
        let constituents = vec![
            Constituent::from_ranks("m1", r.clone()),
            Constituent::from_ranks("m2", r.clone()),
        ];
        let table =
            combine_rankings(&constituents, TieMode::Shared, "all", &SubsetFilter::everything())
                .unwrap();
        for (team, rank) in &r {
            assert_eq!(table.team(team).unwrap().final_rank, *rank);
        }
    }

    #[test]
    fn shared_vs_broken_tie_modes() {
        let constituents = vec![Constituent::from_ranks(
            "m",
            ranks_of(&[("fit2", 20), ("nvauto", 20), ("hilab", 22)]),
        )];
        let shared =
            combine_rankings(&constituents, TieMode::Shared, "all", &SubsetFilter::everything())
                .unwrap();
        assert_eq!(shared.team("fit2").unwrap().final_rank, 1);
        assert_eq!(shared.team("nvauto").unwrap().final_rank, 1);
        assert!(shared.team("fit2").unwrap().tied);
        assert_eq!(shared.team("hilab").unwrap().final_rank, 3);

        let broken =
            combine_rankings(&constituents, TieMode::Broken, "all", &SubsetFilter::everything())
                .unwrap();
        // lexicographic break: "fit2" < "nvauto"
        assert_eq!(broken.team("fit2").unwrap().final_rank, 1);
        assert_eq!(broken.team("nvauto").unwrap().final_rank, 2);
        assert!(broken.team("nvauto").unwrap().tied);
        assert_eq!(broken.team("hilab").unwrap().final_rank, 3);
    }

    #[test]
    fn mismatched_team_sets_are_rejected() {
        let constituents = vec![
            Constituent::from_ranks("m1", ranks_of(&[("a", 1), ("b", 2)])),
            Constituent::from_ranks("m2", ranks_of(&[("a", 1), ("c", 2)])),
        ];
        assert!(matches!(
            combine_rankings(&constituents, TieMode::Shared, "all", &SubsetFilter::everything()),
            Err(Error::Ranking(_))
        ));
    }

    #[test]
    fn monotone_transform_invariance() {
        let v = values(&[("a", 0.9), ("b", 0.5), ("c", 0.7)]);
        let transformed: BTreeMap<String, f64> =
            v.iter().map(|(t, x)| (t.clone(), x.exp() * 3.0 + 1.0)).collect();
        let r1 = rank_by_metric(&v, Direction::HigherBetter).unwrap();
        let r2 = rank_by_metric(&transformed, Direction::HigherBetter).unwrap();
        assert_eq!(r1, r2);
    }
}
