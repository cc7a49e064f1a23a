//! Evaluation and ranking engine for multi-class 3D segmentation challenges.
//!
//! The crate covers the full FeTA-style evaluation pipeline:
//!
//! 1. **Ingestion** — NIfTI-1 label volumes ([`nifti`]), a plain-text sidecar
//!    format for fixtures ([`volume`]), and CSV manifests tying cases to team
//!    predictions ([`manifest`]).
//! 2. **Metrics** — Dice and volume similarity ([`overlap`]), the robust
//!    95th-percentile Hausdorff distance in millimeters ([`surface`]), and
//!    Betti-number topology errors on the voxel cubical complex ([`topology`]).
//! 3. **Orchestration** — per-case/per-tissue evaluation with pool-relative
//!    missing-label penalties and subset aggregation ([`engine`]).
//! 4. **Ranking** — per-metric competition ranks, combined/global/topology
//!    rankings, bootstrap stability, and pairwise significance ([`ranking`]).
//! 5. **Reporting** — deterministic markdown/CSV/JSON renderings ([`report`]).
//!
//! Geometric kernels are generic over the scalar type via [`scalar::Scalar`];
//! the pipeline itself runs on the [`Real`] alias below.

pub mod edt;
pub mod engine;
pub mod error;
pub mod manifest;
pub mod nifti;
pub mod overlap;
pub mod phantom;
pub mod ranking;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod subset;
pub mod surface;
pub mod topology;
pub mod volume;

pub use error::{Error, Result};

/// Scalar type used by the evaluation pipeline. The kernels stay generic;
/// everything the engine persists is computed at this precision.
pub type Real = f64;

/// Grid dimensions in voxels, x-fastest storage order.
pub type Dims = (usize, usize, usize);
