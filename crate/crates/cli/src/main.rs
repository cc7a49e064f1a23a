//! `fetaval` — manifest-driven batch evaluation and ranking for multi-class
//! 3D segmentation challenges.
//!
//! Subcommand layout: `evaluate` runs the metric engine and persists a run
//! file; `rank` re-reduces a persisted run into ranking tables (cheap, so
//! ranking variants never repeat metric computation); `synth` builds a
//! self-contained synthetic challenge; `report` renders the full bundle.
//!
//! Progress goes to stderr, data artifacts to files, nothing data-bearing on
//! stdout. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
//! invariant violation.

mod synth;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fetaval_core::engine::{
    apply_penalties, evaluate_manifest, EvalConfig, EvaluationRun, PenaltyPolicy, PenaltyScope,
};
use fetaval_core::manifest::load_manifest;
use fetaval_core::ranking::{
    bne_ranking, bootstrap_stability, global_ranking, per_tissue_bne_rankings,
    topology_integrative_ranking, RankingKind, RankingTable, TieMode,
};
use fetaval_core::report;
use fetaval_core::subset::SubsetFilter;
use fetaval_core::topology::Connectivity;
use fetaval_core::volume::TissueLabel;
use fetaval_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fetaval", version, about = "Segmentation challenge evaluation and ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate team predictions against ground truth per the manifest.
    Evaluate(EvaluateArgs),
    /// Compute ranking tables from a persisted run.
    Rank(RankArgs),
    /// Generate a synthetic challenge with controlled error patterns.
    Synth(synth::SynthArgs),
    /// Render the full report bundle from a persisted run.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PenaltyScopeArg {
    PerLabel,
    Global,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TieModeArg {
    Shared,
    Broken,
}

impl From<TieModeArg> for TieMode {
    fn from(v: TieModeArg) -> TieMode {
        match v {
            TieModeArg::Shared => TieMode::Shared,
            TieModeArg::Broken => TieMode::Broken,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RankingKindArg {
    Global,
    Bne,
    Tir,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Team predictions CSV; omit for a ground-truth-only inspection run.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output directory for records.csv and run.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker count for per-case evaluation.
    #[arg(long, env = "FETAVAL_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Percentile of the robust Hausdorff distance.
    #[arg(long, default_value_t = 95.0)]
    hd_percentile: f64,
    /// Pool scope of the missing-label HD95 penalty.
    #[arg(long, value_enum, default_value = "per-label")]
    penalty_scope: PenaltyScopeArg,
    /// Foreground connectivity for component counting (background uses the
    /// dual).
    #[arg(long, default_value_t = 26)]
    connectivity: u8,
    /// Exclude vacuous both-empty records from aggregates.
    #[arg(long)]
    exclude_both_empty: bool,
    /// Map out-of-alphabet label codes to background instead of failing.
    #[arg(long)]
    permissive_labels: bool,
    /// Report and exclude unreadable inputs instead of aborting.
    #[arg(long)]
    skip_broken: bool,
    /// Penalty used when a scope has no finite HD95 at all.
    #[arg(long)]
    fallback_hd95: Option<f64>,
    /// Penalty used when a tissue has no finite BNE at all.
    #[arg(long)]
    fallback_bne: Option<f64>,
}

#[derive(Args)]
struct RankArgs {
    /// Persisted run.json from `evaluate`.
    #[arg(long)]
    run: PathBuf,
    /// Output directory for ranking files.
    #[arg(long)]
    out: PathBuf,
    /// Subset predicate `key=value`; repeatable, predicates conjoin. Keys:
    /// institution, domain, pathology, quality, sr_method, tissue.
    #[arg(long = "subset", value_name = "KEY=VALUE")]
    subsets: Vec<String>,
    /// Emit the full suite: global, domain, quality, pathology, SR-method,
    /// per-label, BNE, and topology-integrative rankings.
    #[arg(long)]
    all_subsets: bool,
    /// Ranking computed for a single `--subset` invocation.
    #[arg(long, value_enum, default_value = "global")]
    kind: RankingKindArg,
    #[arg(long, value_enum, default_value = "shared")]
    tie_mode: TieModeArg,
    /// Also bootstrap the requested ranking's stability.
    #[arg(long)]
    stability: bool,
    /// Bootstrap resample count.
    #[arg(long, default_value_t = 1000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Persisted run.json from `evaluate`.
    #[arg(long)]
    run: PathBuf,
    /// Output directory for the report bundle.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "shared")]
    tie_mode: TieModeArg,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Synth(args) => synth::cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fetaval: error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}

fn build_config(args: &EvaluateArgs) -> Result<EvalConfig> {
    if args.jobs == 0 {
        return Err(Error::Data("--jobs must be >= 1".into()));
    }
    if !(args.hd_percentile > 0.0 && args.hd_percentile <= 100.0) {
        return Err(Error::Data(format!(
            "--hd-percentile must be in (0, 100], got {}",
            args.hd_percentile
        )));
    }
    let connectivity = Connectivity::from_neighbors(args.connectivity).ok_or_else(|| {
        Error::Data(format!("--connectivity must be 6, 18, or 26, got {}", args.connectivity))
    })?;
    Ok(EvalConfig {
        hd_percentile: args.hd_percentile,
        connectivity,
        penalty: PenaltyPolicy {
            hd95_scope: match args.penalty_scope {
                PenaltyScopeArg::PerLabel => PenaltyScope::PerLabel,
                PenaltyScopeArg::Global => PenaltyScope::Global,
            },
            fallback_hd95_mm: args.fallback_hd95,
            fallback_bne: args.fallback_bne,
        },
        include_both_empty: !args.exclude_both_empty,
        strict_labels: !args.permissive_labels,
    })
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let config = build_config(&args)?;
    let manifest = load_manifest(&args.manifest, args.predictions.as_deref())?;
    eprintln!(
        "evaluating {} team entr{} over {} case(s) with {} worker(s)",
        manifest.team_entries.len(),
        if manifest.team_entries.len() == 1 { "y" } else { "ies" },
        manifest.gt_entries.len(),
        args.jobs
    );
    let mut run = evaluate_manifest(&manifest, &config, args.jobs, args.skip_broken)?;
    for note in &run.notes {
        eprintln!("note: {note}");
    }
    apply_penalties(&mut run)?;
    std::fs::create_dir_all(&args.out)?;
    report::write_records_csv(&run, &args.out.join("records.csv"))?;
    run.save(&args.out.join("run.json"))?;
    eprintln!(
        "wrote {} records to {}",
        run.records.len(),
        args.out.join("records.csv").display()
    );
    Ok(())
}

fn parse_subset(predicates: &[String]) -> Result<SubsetFilter> {
    let mut filter = SubsetFilter::everything();
    for predicate in predicates {
        let (key, value) = predicate.split_once('=').ok_or_else(|| {
            Error::Subset(format!("subset predicate must be key=value, got {predicate:?}"))
        })?;
        filter.apply_predicate(key, value)?;
    }
    Ok(filter)
}

fn write_table(outdir: &Path, name: &str, table: &RankingTable) -> Result<()> {
    let files = report::write_ranking_files(outdir, name, table)?;
    eprintln!("wrote {}", files.json.display());
    Ok(())
}

/// Emits one ranking per analysis axis, skipping subsets the run's case
/// roster cannot populate.
fn rank_all_subsets(run: &EvaluationRun, outdir: &Path, tie_mode: TieMode) -> Result<()> {
    let everything = SubsetFilter::everything();
    write_table(outdir, "global", &global_ranking(run, &everything, tie_mode)?)?;
    write_table(outdir, "bne", &bne_ranking(run, &everything, tie_mode)?)?;
    write_table(outdir, "tir", &topology_integrative_ranking(run, &everything, tie_mode)?)?;

    let mut conditional: Vec<(String, SubsetFilter)> = vec![
        (
            "in_domain".into(),
            SubsetFilter::with_domain(fetaval_core::manifest::Domain::InDomain),
        ),
        (
            "out_of_domain".into(),
            SubsetFilter::with_domain(fetaval_core::manifest::Domain::OutOfDomain),
        ),
        (
            "pathology_normal".into(),
            SubsetFilter::with_pathology(fetaval_core::manifest::Pathology::Normal),
        ),
        (
            "pathology_pathological".into(),
            SubsetFilter::with_pathology(fetaval_core::manifest::Pathology::Pathological),
        ),
    ];
    for quality in 1..=3u8 {
        conditional.push((format!("quality_{quality}"), SubsetFilter::with_quality(quality)));
    }
    let mut sr_methods: Vec<String> =
        run.cases.iter().map(|c| c.sr_method.to_string()).collect();
    sr_methods.sort();
    sr_methods.dedup();
    for sr in sr_methods {
        conditional.push((format!("sr_{sr}"), SubsetFilter::with_sr_method(&sr)));
    }
    for (name, filter) in conditional {
        match global_ranking(run, &filter, tie_mode) {
            Ok(table) => write_table(outdir, &name, &table)?,
            Err(Error::Subset(msg)) => eprintln!("skipping {name}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    for tissue in TissueLabel::SCORED {
        let filter = SubsetFilter::with_tissue(tissue);
        write_table(
            outdir,
            &format!("tissue_{}", tissue.name()),
            &global_ranking(run, &filter, tie_mode)?,
        )?;
        write_table(
            outdir,
            &format!("bne_tissue_{}", tissue.name()),
            &bne_ranking(run, &filter, tie_mode)?,
        )?;
    }
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let run = EvaluationRun::load(&args.run)?;
    let tie_mode: TieMode = args.tie_mode.into();
    std::fs::create_dir_all(&args.out)?;

    if args.all_subsets {
        rank_all_subsets(&run, &args.out, tie_mode)?;
    }
    let filter = parse_subset(&args.subsets)?;
    let kind = match args.kind {
        RankingKindArg::Global => RankingKind::Global,
        RankingKindArg::Bne => RankingKind::Bne,
        RankingKindArg::Tir => RankingKind::Tir,
    };
    if !args.all_subsets || !args.subsets.is_empty() {
        let table = match kind {
            RankingKind::Global => global_ranking(&run, &filter, tie_mode)?,
            RankingKind::Bne => bne_ranking(&run, &filter, tie_mode)?,
            RankingKind::Tir => topology_integrative_ranking(&run, &filter, tie_mode)?,
        };
        let name = match (args.subsets.is_empty(), kind) {
            (true, RankingKind::Global) => "global".to_string(),
            (true, RankingKind::Bne) => "bne".to_string(),
            (true, RankingKind::Tir) => "tir".to_string(),
            (false, _) => filter.describe(),
        };
        write_table(&args.out, &name, &table)?;
        if args.stability {
            let stability =
                bootstrap_stability(&run, &filter, kind, args.bootstrap_b, args.seed, tie_mode)?;
            let path = args
                .out
                .join(format!("stability_{}.json", report::sanitize_name(&name)));
            std::fs::write(&path, report::stability_to_json(&stability))?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let run = EvaluationRun::load(&args.run)?;
    let tie_mode: TieMode = args.tie_mode.into();
    std::fs::create_dir_all(&args.out)?;

    report::write_records_csv(&run, &args.out.join("records.csv"))?;

    let everything = SubsetFilter::everything();
    let global = global_ranking(&run, &everything, tie_mode)?;
    let bne = bne_ranking(&run, &everything, tie_mode)?;
    let tir = topology_integrative_ranking(&run, &everything, tie_mode)?;
    write_table(&args.out, "global", &global)?;
    write_table(&args.out, "bne", &bne)?;
    write_table(&args.out, "tir", &tir)?;

    let in_domain = SubsetFilter::with_domain(fetaval_core::manifest::Domain::InDomain);
    let out_domain = SubsetFilter::with_domain(fetaval_core::manifest::Domain::OutOfDomain);
    let domain_tables = match (
        global_ranking(&run, &in_domain, tie_mode),
        global_ranking(&run, &out_domain, tie_mode),
    ) {
        (Ok(ind), Ok(ood)) => {
            write_table(&args.out, "in_domain", &ind)?;
            write_table(&args.out, "out_of_domain", &ood)?;
            Some((ind, ood))
        }
        // single-domain runs still get the rest of the bundle
        (Err(Error::Subset(msg)), _) | (_, Err(Error::Subset(msg))) => {
            eprintln!("skipping domain tables: {msg}");
            None
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };

    let per_tissue = per_tissue_bne_rankings(&run, &everything, tie_mode)?;
    for (tissue, table) in &per_tissue {
        write_table(&args.out, &format!("bne_tissue_{}", tissue.name()), table)?;
    }

    let mut summary = report::render_summary(&run)?;
    if let Some((ind, ood)) = &domain_tables {
        let (md, csv) = report::render_global_table(&run, &global, ind, ood)?;
        summary.push('\n');
        summary.push_str(&md);
        std::fs::write(args.out.join("final_rankings.csv"), csv)?;
    }
    let (topo_md, topo_csv) = report::render_topology_comparison(&bne, &tir, &global)?;
    summary.push('\n');
    summary.push_str(&topo_md);
    std::fs::write(args.out.join("topology_rankings.csv"), topo_csv)?;
    let (tissue_md, tissue_csv) = report::render_per_tissue_topology(&per_tissue)?;
    summary.push('\n');
    summary.push_str(&tissue_md);
    std::fs::write(args.out.join("topology_per_tissue.csv"), tissue_csv)?;
    std::fs::write(args.out.join("summary.md"), summary)?;

    report::write_provenance(&run, &args.out.join("provenance.json"), Some(utc_now_iso()))?;
    eprintln!("report bundle written to {}", args.out.display());
    Ok(())
}

/// ISO-8601 UTC timestamp without external dependencies (civil-from-days).
fn utc_now_iso() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let (h, m, s) = ((secs / 3600) % 24, (secs / 60) % 60, secs % 60);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let year = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { year + 1 } else { year };
    format!("{year:04}-{month:02}-{day:02}T{h:02}:{m:02}:{s:02}Z")
}
