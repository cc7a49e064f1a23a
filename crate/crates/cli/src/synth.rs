//! Synthetic challenge generation: phantom ground truths plus N teams whose
//! predictions carry controlled error patterns, wired into ready-to-run
//! manifests. Every metric and penalty path gets exercised: identity
//! predictions, overlap perturbations, topology defects, and dropped labels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use fetaval_core::nifti::write_label_volume;
use fetaval_core::phantom::{apply_error_pattern, generate_phantom, ErrorPattern, PhantomShape, PhantomSpec};
use fetaval_core::volume::{write_sidecar_file, LabelVolume, TissueLabel};
use fetaval_core::{Error, Result};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VolumeFormat {
    Nifti,
    Raw,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory for volumes and manifests.
    #[arg(long)]
    out: PathBuf,
    /// Number of synthetic teams (team_00 is a perfect copy).
    #[arg(long, default_value_t = 3)]
    teams: usize,
    /// Number of cases.
    #[arg(long, default_value_t = 4)]
    cases: usize,
    /// Cubic grid extent per volume.
    #[arg(long, default_value_t = 48)]
    size: usize,
    /// Isotropic voxel spacing in millimeters.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    /// Error pattern for the non-identity teams; default rotates through all
    /// patterns so every evaluation path is hit.
    #[arg(long)]
    error: Option<String>,
    /// Tissue targeted by the error pattern.
    #[arg(long, default_value = "WM")]
    tissue: String,
    #[arg(long, value_enum, default_value = "nifti")]
    format: VolumeFormat,
}

const ROTATION: [ErrorPattern; 5] = [
    ErrorPattern::Dilate,
    ErrorPattern::Erode,
    ErrorPattern::SplitComponent,
    ErrorPattern::PunchHole,
    ErrorPattern::DropLabel,
];

fn volume_file_name(case_id: &str, format: VolumeFormat) -> String {
    match format {
        VolumeFormat::Nifti => format!("{case_id}.nii.gz"),
        VolumeFormat::Raw => format!("{case_id}.lv1"),
    }
}

fn write_volume(path: &Path, vol: &LabelVolume, format: VolumeFormat) -> Result<()> {
    match format {
        VolumeFormat::Nifti => write_label_volume(path, vol),
        VolumeFormat::Raw => write_sidecar_file(vol, path),
    }
}

pub fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.teams == 0 || args.cases == 0 {
        return Err(Error::Data("--teams and --cases must be >= 1".into()));
    }
    if args.spacing <= 0.0 {
        return Err(Error::Data(format!("--spacing must be positive, got {}", args.spacing)));
    }
    let tissue = TissueLabel::from_name(&args.tissue)
        .filter(|t| *t != TissueLabel::Background)
        .ok_or_else(|| Error::Data(format!("unknown tissue {:?}", args.tissue)))?;
    let fixed_pattern = match &args.error {
        Some(token) => Some(ErrorPattern::parse(token).ok_or_else(|| {
            Error::Data(format!(
                "unknown error pattern {token:?} (none, dilate, erode, split-component, punch-hole, drop-label)"
            ))
        })?),
        None => None,
    };

    let gt_dir = args.out.join("gt");
    std::fs::create_dir_all(&gt_dir)?;

    let mut manifest_csv =
        String::from("case_id,gt_path,institution,domain,ga_weeks,pathology,quality,sr_method\n");
    let mut predictions_csv = String::from("team_id,case_id,prediction_path\n");

    let sites = [
        ("Kispi", "in_domain", "mialsrtk"),
        ("Vienna", "in_domain", "niftymic"),
        ("CHUV", "out_of_domain", "mialsrtk"),
        ("UCSF", "out_of_domain", "irtk_simple"),
    ];

    for case in 0..args.cases {
        let case_id = format!("case_{case:03}");
        // vary anatomy size per case; scale stays within the fit bounds of
        // the brainlike phantom for any grid >= 24
        let scale = 0.85 + 0.05 * (case % 4) as f64;
        let spec = PhantomSpec {
            shape: PhantomShape::FullBrainlike { scale },
            size: (args.size, args.size, args.size),
            spacing: (args.spacing, args.spacing, args.spacing),
            label: tissue,
            case_id: case_id.clone(),
        };
        let gt = generate_phantom(&spec)?;
        let gt_name = volume_file_name(&case_id, args.format);
        write_volume(&gt_dir.join(&gt_name), &gt, args.format)?;

        let (institution, domain, sr_method) = sites[case % sites.len()];
        let quality = 1 + (case % 3);
        let pathology = if case % 2 == 0 { "normal" } else { "pathological" };
        let ga = 20.0 + 1.5 * case as f64;
        let _ = writeln!(
            manifest_csv,
            "{case_id},gt/{gt_name},{institution},{domain},{ga:.1},{pathology},{quality},{sr_method}"
        );

        for team in 0..args.teams {
            let team_id = format!("team_{team:02}");
            let pattern = if team == 0 {
                ErrorPattern::None
            } else {
                fixed_pattern.unwrap_or(ROTATION[(team - 1) % ROTATION.len()])
            };
            let pred = apply_error_pattern(&gt, tissue, pattern)?;
            let team_dir = args.out.join("teams").join(&team_id);
            std::fs::create_dir_all(&team_dir)?;
            let pred_name = volume_file_name(&case_id, args.format);
            write_volume(&team_dir.join(&pred_name), &pred, args.format)?;
            let _ = writeln!(
                predictions_csv,
                "{team_id},{case_id},teams/{team_id}/{pred_name}"
            );
        }
    }

    std::fs::write(args.out.join("manifest.csv"), manifest_csv)?;
    std::fs::write(args.out.join("predictions.csv"), predictions_csv)?;
    eprintln!(
        "synthesized {} case(s) x {} team(s) under {}",
        args.cases,
        args.teams,
        args.out.display()
    );
    eprintln!(
        "evaluate with: fetaval evaluate --manifest {} --predictions {} --out <dir>",
        args.out.join("manifest.csv").display(),
        args.out.join("predictions.csv").display()
    );
    Ok(())
}
