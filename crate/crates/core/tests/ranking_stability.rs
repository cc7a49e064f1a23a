//! Integration tests over hand-built evaluation runs: combined rankings,
//! topology-integrative composition, bootstrap stability, pairwise
//! significance, and the report renderers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fetaval_core::engine::{
    EvalConfig, EvaluationRun, Metric, MetricRecord, RecordFlags,
};
use fetaval_core::manifest::{CaseMetadata, Domain, Institution, Pathology, SrMethod};
use fetaval_core::ranking::{
    bne_ranking, bootstrap_stability, global_ranking, pairwise_significance,
    topology_integrative_ranking, RankingKind, TieMode,
};
use fetaval_core::report::{render_global_table, render_summary};
use fetaval_core::subset::SubsetFilter;
use fetaval_core::topology::{BettiTriple, BneTriple};
use fetaval_core::volume::TissueLabel;

/// Per-record values supplied by a scenario closure.
struct RecordValues {
    dsc: f64,
    hd95: f64,
    vs: f64,
    bne: (f64, f64, f64),
}

fn build_run(
    teams: &[&str],
    cases: usize,
    mut values: impl FnMut(&str, usize, TissueLabel) -> RecordValues,
) -> EvaluationRun {
    let case_meta: Vec<CaseMetadata> = (0..cases)
        .map(|i| CaseMetadata {
            case_id: format!("case_{i:03}"),
            institution: if i % 2 == 0 { Institution::Kispi } else { Institution::Chuv },
            domain: if i % 2 == 0 { Domain::InDomain } else { Domain::OutOfDomain },
            ga_weeks: 22.0 + i as f64,
            pathology: if i % 2 == 0 { Pathology::Normal } else { Pathology::Pathological },
            quality: 1 + (i % 3) as u8,
            sr_method: SrMethod::Mialsrtk,
        })
        .collect();
    let mut records = Vec::new();
    for team in teams {
        for (i, meta) in case_meta.iter().enumerate() {
            for tissue in TissueLabel::SCORED {
                let v = values(team, i, tissue);
                records.push(MetricRecord {
                    team_id: team.to_string(),
                    case_id: meta.case_id.clone(),
                    tissue,
                    dsc: v.dsc,
                    vs: v.vs,
                    hd95_mm: Some(v.hd95),
                    betti: Some(BettiTriple::new(1, 0, 0)),
                    bne: Some(BneTriple::new(v.bne.0, v.bne.1, v.bne.2)),
                    flags: RecordFlags::default(),
                });
            }
        }
    }
    EvaluationRun::new(
        case_meta,
        teams.iter().map(|t| t.to_string()).collect(),
        records,
        EvalConfig::default(),
        Vec::new(),
    )
}

/// A strictly ordered three-team pool: `alpha` best everywhere, `xray` worst
/// in overlap metrics but perfect in topology.
fn ordered_pool() -> EvaluationRun {
    build_run(&["alpha", "bravo", "xray"], 4, |team, _case, _tissue| match team {
        "alpha" => RecordValues { dsc: 0.9, hd95: 1.0, vs: 0.95, bne: (2.0, 2.0, 2.0) },
        "bravo" => RecordValues { dsc: 0.8, hd95: 2.0, vs: 0.90, bne: (1.0, 1.0, 1.0) },
        _ => RecordValues { dsc: 0.7, hd95: 3.0, vs: 0.85, bne: (0.0, 0.0, 0.0) },
    })
}

#[test]
fn global_ranking_matches_hand_arithmetic() {
    let run = ordered_pool();
    let table = global_ranking(&run, &SubsetFilter::everything(), TieMode::Shared).unwrap();
    // per-metric ranks are 1/2/3 for alpha/bravo/xray on all three metrics
    assert_eq!(table.team("alpha").unwrap().combined_score, 3);
    assert_eq!(table.team("bravo").unwrap().combined_score, 6);
    assert_eq!(table.team("xray").unwrap().combined_score, 9);
    assert_eq!(table.team("alpha").unwrap().final_rank, 1);
    assert_eq!(table.team("bravo").unwrap().final_rank, 2);
    assert_eq!(table.team("xray").unwrap().final_rank, 3);
    // subset rankings work off the same records
    let ood = global_ranking(
        &run,
        &SubsetFilter::with_domain(Domain::OutOfDomain),
        TieMode::Shared,
    )
    .unwrap();
    assert_eq!(ood.team("alpha").unwrap().final_rank, 1);
}

#[test]
fn tir_sits_between_global_and_bne_for_topology_winner() {
    let run = ordered_pool();
    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, TieMode::Shared).unwrap();
    let bne = bne_ranking(&run, &everything, TieMode::Shared).unwrap();
    let tir = topology_integrative_ranking(&run, &everything, TieMode::Shared).unwrap();

    // xray wins topology outright but loses every overlap metric
    let g = global.team("xray").unwrap().final_rank;
    let b = bne.team("xray").unwrap().final_rank;
    let t = tir.team("xray").unwrap().final_rank;
    assert_eq!(b, 1);
    assert_eq!(g, 3);
    assert!(b <= t && t <= g, "TIR {t} must sit between BNE {b} and global {g}");
}

#[test]
fn uniform_bne_rank_keeps_tir_equal_to_global() {
    // identical topology everywhere: the BNE constituent adds a constant
    let run = build_run(&["alpha", "bravo", "xray"], 2, |team, _case, _tissue| {
        let (dsc, hd95, vs) = match team {
            "alpha" => (0.9, 1.0, 0.95),
            "bravo" => (0.8, 2.0, 0.90),
            _ => (0.7, 3.0, 0.85),
        };
        RecordValues { dsc, hd95, vs, bne: (1.0, 1.0, 1.0) }
    });
    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, TieMode::Shared).unwrap();
    let tir = topology_integrative_ranking(&run, &everything, TieMode::Shared).unwrap();
    assert_eq!(global.final_ranks(), tir.final_ranks());
}

// ---------------------------------------------------------------------------
// bootstrap stability
// ---------------------------------------------------------------------------

/// Finds a seed whose first resample draws every case exactly once, so the
/// single-resample frequency matrix must be the identity assignment.
fn find_identity_seed(n_cases: usize) -> u64 {
    for seed in 0..100_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let mut drawn: Vec<usize> =
            (0..n_cases).map(|_| rng.random_range(0..n_cases)).collect();
        drawn.sort_unstable();
        if drawn == (0..n_cases).collect::<Vec<_>>() {
            return seed;
        }
    }
    panic!("no identity-resample seed found");
}

#[test]
fn bootstrap_identity_resample_reproduces_full_ranking() {
    let run = ordered_pool();
    let seed = find_identity_seed(run.cases.len());
    let report = bootstrap_stability(
        &run,
        &SubsetFilter::everything(),
        RankingKind::Global,
        1,
        seed,
        TieMode::Shared,
    )
    .unwrap();
    for (t, ranks) in report.rank_frequencies.iter().enumerate() {
        let full = report.full_ranks[t];
        for (r, &freq) in ranks.iter().enumerate() {
            let expected = if r + 1 == full { 1.0 } else { 0.0 };
            assert_eq!(freq, expected, "team {} rank {}", report.teams[t], r + 1);
        }
    }
    assert_eq!(report.kendall_taus, vec![1.0]);
}

#[test]
fn bootstrap_separated_scores_always_rank_first() {
    // non-overlapping per-case score distributions: best team wins every
    // resample
    let run = build_run(&["strong", "weak"], 6, |team, case, _tissue| {
        let jitter = 0.01 * case as f64;
        if team == "strong" {
            RecordValues { dsc: 0.9 + jitter, hd95: 1.0 + jitter, vs: 0.95, bne: (0.0, 0.0, 0.0) }
        } else {
            RecordValues { dsc: 0.3 + jitter, hd95: 9.0 + jitter, vs: 0.40, bne: (5.0, 5.0, 5.0) }
        }
    });
    let report = bootstrap_stability(
        &run,
        &SubsetFilter::everything(),
        RankingKind::Global,
        200,
        7,
        TieMode::Shared,
    )
    .unwrap();
    let strong_idx = report.teams.iter().position(|t| t == "strong").unwrap();
    assert_eq!(report.rank_frequencies[strong_idx][0], 1.0);
    assert!(report.kendall_taus.iter().all(|&t| t == 1.0));
}

#[test]
fn bootstrap_is_deterministic_for_a_seed() {
    let run = ordered_pool();
    let args = (&run, SubsetFilter::everything(), RankingKind::Tir, 50, 123u64, TieMode::Shared);
    let a = bootstrap_stability(args.0, &args.1, args.2, args.3, args.4, args.5).unwrap();
    let b = bootstrap_stability(args.0, &args.1, args.2, args.3, args.4, args.5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bootstrap_needs_at_least_two_cases() {
    let run = build_run(&["a", "b"], 1, |_, _, _| RecordValues {
        dsc: 0.5,
        hd95: 1.0,
        vs: 0.5,
        bne: (0.0, 0.0, 0.0),
    });
    assert!(matches!(
        bootstrap_stability(
            &run,
            &SubsetFilter::everything(),
            RankingKind::Global,
            10,
            0,
            TieMode::Shared
        ),
        Err(fetaval_core::Error::Stability(_))
    ));
}

// ---------------------------------------------------------------------------
// pairwise significance
// ---------------------------------------------------------------------------

#[test]
fn strictly_better_on_twenty_cases_is_significant() {
    let run = build_run(&["better", "worse"], 20, |team, case, _tissue| {
        let base = 0.7 + 0.002 * case as f64;
        let dsc = if team == "better" { base + 0.05 } else { base };
        RecordValues { dsc, hd95: 1.0, vs: 0.9, bne: (0.0, 0.0, 0.0) }
    });
    let result = pairwise_significance(&run, Metric::Dsc, "better", "worse", 0.05).unwrap();
    assert!(result.significant);
    assert!(!result.degenerate);
    assert_eq!(result.n_pairs, 20);
    assert!((result.p_value - 1.0 / 2f64.powi(20)).abs() < 1e-12);
}

#[test]
fn lower_better_metrics_flip_the_direction() {
    let run = build_run(&["fast", "slow"], 12, |team, case, _tissue| {
        let base = 2.0 + 0.05 * case as f64;
        let hd95 = if team == "fast" { base } else { base + 1.0 };
        RecordValues { dsc: 0.8, hd95, vs: 0.9, bne: (0.0, 0.0, 0.0) }
    });
    let result = pairwise_significance(&run, Metric::Hd95, "fast", "slow", 0.05).unwrap();
    assert!(result.significant);
    let reversed = pairwise_significance(&run, Metric::Hd95, "slow", "fast", 0.05).unwrap();
    assert!(!reversed.significant);
}

#[test]
fn identical_teams_are_degenerate_not_significant() {
    let run = build_run(&["twin_a", "twin_b"], 10, |_, case, _tissue| RecordValues {
        dsc: 0.8 + 0.01 * case as f64,
        hd95: 1.0,
        vs: 0.9,
        bne: (0.0, 0.0, 0.0),
    });
    let result = pairwise_significance(&run, Metric::Dsc, "twin_a", "twin_b", 0.05).unwrap();
    assert!(!result.significant);
    assert!(result.degenerate);
    assert_eq!(result.p_value, 1.0);
}

#[test]
fn symmetric_wins_are_not_significant() {
    let run = build_run(&["p", "q"], 10, |team, case, _tissue| {
        // alternating wins of matched magnitude
        let delta = 0.01 + 0.001 * (case / 2) as f64;
        let sign = if case % 2 == 0 { 1.0 } else { -1.0 };
        let dsc = if team == "p" { 0.8 + sign * delta } else { 0.8 };
        RecordValues { dsc, hd95: 1.0, vs: 0.9, bne: (0.0, 0.0, 0.0) }
    });
    let result = pairwise_significance(&run, Metric::Dsc, "p", "q", 0.05).unwrap();
    assert!(!result.significant);
    assert!(result.p_value > 0.3);
}

// ---------------------------------------------------------------------------
// report rendering on synthetic runs
// ---------------------------------------------------------------------------

#[test]
fn global_table_renders_three_rows_with_tie_stars() {
    // bravo and clone share every value, so they tie at rank 2
    let run = build_run(&["alpha", "bravo", "clone"], 4, |team, _case, _tissue| match team {
        "alpha" => RecordValues { dsc: 0.9, hd95: 1.0, vs: 0.95, bne: (0.0, 0.0, 0.0) },
        _ => RecordValues { dsc: 0.8, hd95: 2.0, vs: 0.90, bne: (1.0, 1.0, 1.0) },
    });
    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, TieMode::Shared).unwrap();
    let ind = global_ranking(&run, &SubsetFilter::with_domain(Domain::InDomain), TieMode::Shared)
        .unwrap();
    let ood =
        global_ranking(&run, &SubsetFilter::with_domain(Domain::OutOfDomain), TieMode::Shared)
            .unwrap();
    let (md, csv) = render_global_table(&run, &global, &ind, &ood).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Rank")).count(), 3);
    assert!(md.contains("| 2* | bravo |"), "{md}");
    assert!(md.contains("| 2* | clone |"), "{md}");
    assert!(md.contains("`*` tied"));
    assert!(csv.contains("2,true,bravo"));
    // rendered ranks agree with the ranking table they came from
    for team in &global.teams {
        assert!(csv.lines().any(|l| {
            l.starts_with(&format!("{},", team.final_rank)) && l.contains(&team.team_id)
        }));
    }
}

#[test]
fn single_team_run_renders_one_row_rank_one() {
    let run = build_run(&["solo"], 2, |_, _, _| RecordValues {
        dsc: 0.8,
        hd95: 1.0,
        vs: 0.9,
        bne: (0.0, 0.0, 0.0),
    });
    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, TieMode::Shared).unwrap();
    let ind = global_ranking(&run, &SubsetFilter::with_domain(Domain::InDomain), TieMode::Shared)
        .unwrap();
    let ood =
        global_ranking(&run, &SubsetFilter::with_domain(Domain::OutOfDomain), TieMode::Shared)
            .unwrap();
    let (md, _) = render_global_table(&run, &global, &ind, &ood).unwrap();
    assert!(md.contains("| 1 | solo |"));
}

#[test]
fn rendering_is_byte_deterministic() {
    let run = ordered_pool();
    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, TieMode::Shared).unwrap();
    let a = fetaval_core::report::ranking_to_markdown(&global);
    let b = fetaval_core::report::ranking_to_markdown(&global);
    assert_eq!(a, b);
    let s1 = render_summary(&run).unwrap();
    let s2 = render_summary(&run).unwrap();
    assert_eq!(s1, s2);
    let r1 = fetaval_core::report::records_to_csv(&run);
    let r2 = fetaval_core::report::records_to_csv(&run);
    assert_eq!(r1, r2);
}
