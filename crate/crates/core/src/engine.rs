//! Batch evaluation: per-case/per-tissue metric records, pool-relative
//! missing-label penalties, and subset aggregation.
//!
//! Execution is strictly two-phase. Phase 1 computes every record with
//! missing values left unresolved; phase 2 substitutes penalties from the
//! completed pool (penalties are pool-relative, so a streaming single pass
//! would be order-dependent). Aggregation is a flat mean over the selected
//! (case, tissue) records per team.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{CaseMetadata, Manifest};
use crate::nifti;
use crate::overlap::{counts_for_label, dice, label_confusion, volume_similarity};
use crate::stats::{fnv1a64, mean_std, PERCENTILE_RULE_ID, SIGNIFICANCE_TEST_ID};
use crate::subset::SubsetFilter;
use crate::surface::{extract_surface, robust_hausdorff};
use crate::topology::{
    betti_number_error, betti_numbers_with, BettiTriple, BneTriple, Connectivity, ExpectedTopology,
};
use crate::volume::{read_sidecar_file, LabelVolume, TissueLabel};

/// Multiplier applied to the pool's worst finite value when substituting a
/// missing result.
pub const PENALTY_FACTOR: f64 = 2.0;

/// Identifier of the bootstrap resampling generator, echoed into provenance.
pub const BOOTSTRAP_RNG_ID: &str = "chacha8_case_resample_v1";

/// Scope of the pool from which the HD95 penalty is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyScope {
    PerLabel,
    Global,
}

impl fmt::Display for PenaltyScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltyScope::PerLabel => write!(f, "per_label"),
            PenaltyScope::Global => write!(f, "global"),
        }
    }
}

/// Missing-result substitution rules: HD95 gets twice the pool's worst finite
/// value within `hd95_scope`; each BNE component gets twice the worst finite
/// value for the same tissue. The fallbacks are used verbatim when a scope
/// contains no finite value at all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPolicy {
    pub hd95_scope: PenaltyScope,
    pub fallback_hd95_mm: Option<f64>,
    pub fallback_bne: Option<f64>,
}

impl Default for PenaltyPolicy {
    fn default() -> Self {
        PenaltyPolicy { hd95_scope: PenaltyScope::PerLabel, fallback_hd95_mm: None, fallback_bne: None }
    }
}

/// Evaluation-semantics settings; hashed into provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub hd_percentile: f64,
    pub connectivity: Connectivity,
    pub penalty: PenaltyPolicy,
    /// Include vacuous both-empty records in aggregates (default true).
    pub include_both_empty: bool,
    /// Reject out-of-alphabet codes at load time (default true).
    pub strict_labels: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            hd_percentile: 95.0,
            connectivity: Connectivity::TwentySix,
            penalty: PenaltyPolicy::default(),
            include_both_empty: true,
            strict_labels: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    /// Ground truth has the tissue but the prediction does not.
    pub prediction_missing: bool,
    /// Ground truth lacks the tissue but the prediction has it.
    pub gt_empty: bool,
    /// Neither side has the tissue; vacuous agreement.
    pub both_empty: bool,
    pub penalized_hd95: bool,
    pub penalized_bne: bool,
}

impl RecordFlags {
    pub fn any(&self) -> bool {
        self.prediction_missing || self.gt_empty || self.both_empty || self.penalized_hd95 || self.penalized_bne
    }
}

impl fmt::Display for RecordFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.prediction_missing {
            parts.push("prediction_missing");
        }
        if self.gt_empty {
            parts.push("gt_empty");
        }
        if self.both_empty {
            parts.push("both_empty");
        }
        if self.penalized_hd95 {
            parts.push("penalized_hd95");
        }
        if self.penalized_bne {
            parts.push("penalized_bne");
        }
        write!(f, "{}", parts.join(";"))
    }
}

/// One (team, case, tissue) evaluation row. `hd95_mm` and `bne` stay `None`
/// until the penalty pass resolves them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub team_id: String,
    pub case_id: String,
    pub tissue: TissueLabel,
    pub dsc: f64,
    pub vs: f64,
    pub hd95_mm: Option<f64>,
    pub betti: Option<BettiTriple>,
    pub bne: Option<BneTriple>,
    pub flags: RecordFlags,
}

/// Metric selected for aggregation and ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Dsc,
    Hd95,
    Vs,
    Bne0,
    Bne1,
    Bne2,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "DSC",
            Metric::Hd95 => "HD95",
            Metric::Vs => "VS",
            Metric::Bne0 => "BNE0",
            Metric::Bne1 => "BNE1",
            Metric::Bne2 => "BNE2",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Dsc | Metric::Vs)
    }
}

impl MetricRecord {
    /// Metric value, or `None` while a penalty is still unresolved.
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Dsc => Some(self.dsc),
            Metric::Vs => Some(self.vs),
            Metric::Hd95 => self.hd95_mm,
            Metric::Bne0 => self.bne.map(|b| b.e0),
            Metric::Bne1 => self.bne.map(|b| b.e1),
            Metric::Bne2 => self.bne.map(|b| b.e2),
        }
    }
}

/// Reproducibility block persisted with every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub penalty_scope: String,
    pub aggregation: String,
    pub percentile_rule: String,
    pub bootstrap_rng: String,
    pub significance_test: String,
}

/// A completed evaluation: the case roster, team list, record set, and the
/// configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub cases: Vec<CaseMetadata>,
    pub teams: Vec<String>,
    pub records: Vec<MetricRecord>,
    pub config: EvalConfig,
    pub provenance: Provenance,
    /// Deterministic log of skipped inputs and permissive-mode remaps.
    pub notes: Vec<String>,
}

fn config_hash(config: &EvalConfig) -> String {
    let encoded = serde_json::to_vec(config).expect("config serializes");
    format!("{:016x}", fnv1a64(&encoded))
}

fn make_provenance(config: &EvalConfig) -> Provenance {
    Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config),
        penalty_scope: config.penalty.hd95_scope.to_string(),
        aggregation: "flat_mean_population_std_v1".to_string(),
        percentile_rule: PERCENTILE_RULE_ID.to_string(),
        bootstrap_rng: BOOTSTRAP_RNG_ID.to_string(),
        significance_test: SIGNIFICANCE_TEST_ID.to_string(),
    }
}

impl EvaluationRun {
    pub fn new(
        mut cases: Vec<CaseMetadata>,
        mut teams: Vec<String>,
        mut records: Vec<MetricRecord>,
        config: EvalConfig,
        mut notes: Vec<String>,
    ) -> EvaluationRun {
        cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        teams.sort();
        records.sort_by(|a, b| {
            (&a.team_id, &a.case_id, a.tissue.code()).cmp(&(&b.team_id, &b.case_id, b.tissue.code()))
        });
        notes.sort();
        let provenance = make_provenance(&config);
        EvaluationRun { cases, teams, records, config, provenance, notes }
    }

    pub fn case_meta(&self, case_id: &str) -> Option<&CaseMetadata> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    /// `true` when every (team, case) pair contributed all seven records.
    pub fn is_complete(&self) -> bool {
        self.records.len() == 7 * self.teams.len() * self.cases.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run serializes")
    }

    pub fn from_json(text: &str) -> Result<EvaluationRun> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("run file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EvaluationRun> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        EvaluationRun::from_json(&text)
    }
}

fn check_same_grid(pred: &LabelVolume, gt: &LabelVolume) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::Shape(format!(
            "prediction grid {:?} does not match ground truth {:?} for case {:?}",
            pred.dims(),
            gt.dims(),
            gt.case_id()
        )));
    }
    let (px, py, pz) = pred.spacing();
    let (gx, gy, gz) = gt.spacing();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    if rel(px, gx) > 1e-6 || rel(py, gy) > 1e-6 || rel(pz, gz) > 1e-6 {
        return Err(Error::Shape(format!(
            "prediction spacing ({px}, {py}, {pz}) differs from ground truth ({gx}, {gy}, {gz}) beyond 1e-6 relative for case {:?}",
            gt.case_id()
        )));
    }
    Ok(())
}

/// Evaluates one prediction against its ground truth: seven records with
/// penalties left unresolved.
pub fn evaluate_case(
    team_id: &str,
    pred: &LabelVolume,
    gt: &LabelVolume,
    config: &EvalConfig,
) -> Result<Vec<MetricRecord>> {
    check_same_grid(pred, gt)?;
    let confusion = label_confusion(pred, gt)?;
    let expected = ExpectedTopology::default();
    let mut records = Vec::with_capacity(7);

    for tissue in TissueLabel::SCORED {
        let counts = counts_for_label(&confusion, tissue);
        let pred_empty = counts.prediction_size() == 0;
        let gt_empty = counts.ground_truth_size() == 0;
        let dsc = dice::<f64>(&counts);
        let vs = volume_similarity::<f64>(&counts);
        let mut flags = RecordFlags::default();

        let (hd95_mm, betti, bne) = match (pred_empty, gt_empty) {
            (true, true) => {
                flags.both_empty = true;
                let zero = BettiTriple::new(0, 0, 0);
                (Some(0.0), Some(zero), Some(BneTriple::new(0.0, 0.0, 0.0)))
            }
            (true, false) => {
                flags.prediction_missing = true;
                (None, None, None)
            }
            (false, true) => {
                // Spurious structure: overlap scores are zero by the count
                // formulas, HD95 is pool-penalized, topology is measurable.
                flags.gt_empty = true;
                let pred_mask = pred.binary_mask(tissue)?;
                let triple = betti_numbers_with(&pred_mask, config.connectivity)?;
                let bne = betti_number_error(&triple, tissue, &expected);
                (None, Some(triple), Some(bne))
            }
            (false, false) => {
                let pred_mask = pred.binary_mask(tissue)?;
                let gt_mask = gt.binary_mask(tissue)?;
                let pred_surface = extract_surface(&pred_mask)?;
                let gt_surface = extract_surface(&gt_mask)?;
                let hd = robust_hausdorff(&pred_surface, &gt_surface, config.hd_percentile)?;
                let triple = betti_numbers_with(&pred_mask, config.connectivity)?;
                let bne = betti_number_error(&triple, tissue, &expected);
                (Some(hd), Some(triple), Some(bne))
            }
        };

        records.push(MetricRecord {
            team_id: team_id.to_string(),
            case_id: gt.case_id().to_string(),
            tissue,
            dsc,
            vs,
            hd95_mm,
            betti,
            bne,
            flags,
        });
    }
    Ok(records)
}

fn load_volume(path: &Path, config: &EvalConfig) -> Result<(LabelVolume, u64)> {
    let is_sidecar = path.extension().map(|e| e == "lv1").unwrap_or(false);
    if is_sidecar {
        Ok((read_sidecar_file(path)?, 0))
    } else {
        let options = nifti::LoadOptions { strict_labels: config.strict_labels };
        let (vol, stats) = nifti::read_label_volume_with(path, &options)?;
        Ok((vol, stats.remapped_out_of_alphabet))
    }
}

/// Runs phase 1 over a manifest with `jobs` workers. Results are identical
/// for any worker count. Unreadable inputs abort the run unless
/// `skip_broken`, which drops the affected (team, case) pair with a note.
pub fn evaluate_manifest(
    manifest: &Manifest,
    config: &EvalConfig,
    jobs: usize,
    skip_broken: bool,
) -> Result<EvaluationRun> {
    if jobs == 0 {
        return Err(Error::Data("worker count must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Data(format!("cannot build worker pool: {e}")))?;

    let mut by_case: BTreeMap<&str, Vec<&crate::manifest::TeamEntry>> = BTreeMap::new();
    for entry in &manifest.team_entries {
        by_case.entry(entry.case_id.as_str()).or_default().push(entry);
    }
    for entries in by_case.values_mut() {
        entries.sort_by(|a, b| a.team_id.cmp(&b.team_id));
    }

    type CaseOutput = (Vec<MetricRecord>, Vec<String>);
    let evaluate_one_case = |gt_entry: &crate::manifest::GtEntry| -> Result<CaseOutput> {
        let case_id = gt_entry.meta.case_id.as_str();
        let mut notes = Vec::new();
        let Some(entries) = by_case.get(case_id) else {
            return Ok((Vec::new(), notes));
        };
        let (gt, gt_remapped) = load_volume(&gt_entry.gt_path, config).map_err(|e| {
            Error::Data(format!("case {case_id:?}: ground truth: {e}"))
        })?;
        if gt_remapped > 0 {
            notes.push(format!(
                "case {case_id:?}: ground truth: {gt_remapped} out-of-alphabet voxels mapped to background"
            ));
        }
        let gt = Arc::new(gt);
        let mut records = Vec::new();
        for entry in entries {
            let team = entry.team_id.as_str();
            let loaded = load_volume(&entry.prediction_path, config).and_then(|(pred, remapped)| {
                evaluate_case(team, &pred, &gt, config).map(|r| (r, remapped))
            });
            match loaded {
                Ok((recs, remapped)) => {
                    if remapped > 0 {
                        notes.push(format!(
                            "team {team:?}, case {case_id:?}: {remapped} out-of-alphabet voxels mapped to background"
                        ));
                    }
                    records.extend(recs);
                }
                Err(e) if skip_broken && e.is_data_error() => {
                    notes.push(format!("skipped team {team:?}, case {case_id:?}: {e}"));
                }
                Err(e) => {
                    return Err(Error::Data(format!("team {team:?}, case {case_id:?}: {e}")))
                }
            }
        }
        Ok((records, notes))
    };

    let outputs: Result<Vec<CaseOutput>> = pool.install(|| {
        manifest
            .gt_entries
            .par_iter()
            .map(evaluate_one_case)
            .collect()
    });
    let outputs = outputs?;

    let mut records = Vec::new();
    let mut notes = Vec::new();
    for (recs, case_notes) in outputs {
        records.extend(recs);
        notes.extend(case_notes);
    }
    let cases: Vec<CaseMetadata> = manifest.gt_entries.iter().map(|e| e.meta.clone()).collect();
    Ok(EvaluationRun::new(cases, manifest.team_ids(), records, config.clone(), notes))
}

fn max_finite(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
}

/// Phase 2: substitutes pool-relative penalties into every unresolved record.
/// Deterministic regardless of evaluation order.
pub fn apply_penalties(run: &mut EvaluationRun) -> Result<()> {
    let policy = run.config.penalty;

    // HD95 pool maxima within the configured scope.
    let hd95_pool = |records: &[MetricRecord], tissue: TissueLabel| -> Option<f64> {
        match policy.hd95_scope {
            PenaltyScope::Global => max_finite(records.iter().filter_map(|r| r.hd95_mm)),
            PenaltyScope::PerLabel => {
                max_finite(records.iter().filter(|r| r.tissue == tissue).filter_map(|r| r.hd95_mm))
            }
        }
    };
    // BNE pools are always per tissue and per dimension.
    let bne_pool = |records: &[MetricRecord], tissue: TissueLabel, k: usize| -> Option<f64> {
        max_finite(
            records
                .iter()
                .filter(|r| r.tissue == tissue)
                .filter_map(|r| r.bne.map(|b| b.component(k))),
        )
    };

    let snapshot = run.records.clone();
    for record in &mut run.records {
        if record.hd95_mm.is_none() {
            let penalty = match hd95_pool(&snapshot, record.tissue) {
                Some(max) => PENALTY_FACTOR * max,
                None => policy.fallback_hd95_mm.ok_or_else(|| {
                    Error::Policy(format!(
                        "no finite HD95 in scope {} for tissue {}; set an explicit fallback penalty (fallback_hd95_mm)",
                        policy.hd95_scope, record.tissue
                    ))
                })?,
            };
            record.hd95_mm = Some(penalty);
            record.flags.penalized_hd95 = true;
        }
        if record.bne.is_none() {
            let mut components = [0.0f64; 3];
            for (k, slot) in components.iter_mut().enumerate() {
                *slot = match bne_pool(&snapshot, record.tissue, k) {
                    Some(max) => PENALTY_FACTOR * max,
                    None => policy.fallback_bne.ok_or_else(|| {
                        Error::Policy(format!(
                            "no finite BNE_{k} for tissue {}; set an explicit fallback penalty (fallback_bne)",
                            record.tissue
                        ))
                    })?,
                };
            }
            record.bne = Some(BneTriple::new(components[0], components[1], components[2]));
            record.flags.penalized_bne = true;
        }
    }
    Ok(())
}

/// Per-team flat mean, population standard deviation, and record count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Aggregates one metric over the subset's (case, tissue) records per team.
pub fn aggregate(
    run: &EvaluationRun,
    subset: &SubsetFilter,
    metric: Metric,
) -> Result<BTreeMap<String, Aggregate>> {
    let meta_by_case: HashMap<&str, &CaseMetadata> =
        run.cases.iter().map(|c| (c.case_id.as_str(), c)).collect();
    let mut per_team: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for record in &run.records {
        let Some(meta) = meta_by_case.get(record.case_id.as_str()) else {
            continue;
        };
        if !subset.matches(meta, record.tissue) {
            continue;
        }
        if record.flags.both_empty && !run.config.include_both_empty {
            continue;
        }
        let value = record.value(metric).ok_or_else(|| {
            Error::Policy(format!(
                "{} unresolved for team {:?}, case {:?}, tissue {}; apply penalties before aggregating",
                metric.name(),
                record.team_id,
                record.case_id,
                record.tissue
            ))
        })?;
        per_team.entry(record.team_id.as_str()).or_default().push(value);
    }
    if per_team.is_empty() {
        return Err(Error::Subset(format!(
            "subset {:?} selects no records",
            subset.describe()
        )));
    }
    for team in &run.teams {
        if !per_team.contains_key(team.as_str()) {
            return Err(Error::Subset(format!(
                "subset {:?} selects no records for team {team:?}",
                subset.describe()
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (team, values) in per_team {
        let (mean, std) = mean_std(&values);
        out.insert(team.to_string(), Aggregate { mean, std, n: values.len() });
    }
    Ok(out)
}
