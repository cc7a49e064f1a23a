//! Deterministic phantom volumes with analytically known topology, plus the
//! controlled error operators used to build synthetic challenges.
//!
//! Expected Betti triples per shape (foreground of the generated label):
//!
//! | shape            | per-label Betti                                   |
//! |------------------|---------------------------------------------------|
//! | `solid_ball`     | (1, 0, 0)                                         |
//! | `hollow_shell`   | (1, 0, 1) — 3x3x3 cube minus its center voxel     |
//! | `voxel_torus`    | (1, 1, 0) — 3x3 one-voxel-thick square ring       |
//! | `two_components` | (2, 0, 0) — two 26-separated balls                |
//! | `nested_labels`  | core (1,0,0); each enclosing shell (1,0,1)        |
//! | `full_brainlike` | every tissue (1,0,0) except GM with (2,0,0)       |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::BettiTriple;
use crate::volume::{LabelVolume, TissueLabel};
use crate::{Dims, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhantomShape {
    SolidBall { radius_vox: f64 },
    HollowShell,
    VoxelTorus,
    TwoComponents { radius_vox: f64 },
    NestedLabels,
    FullBrainlike { scale: f64 },
}

impl PhantomShape {
    pub fn parse(token: &str) -> Option<PhantomShape> {
        match token.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "solid_ball" => Some(PhantomShape::SolidBall { radius_vox: 3.0 }),
            "hollow_shell" => Some(PhantomShape::HollowShell),
            "voxel_torus" => Some(PhantomShape::VoxelTorus),
            "two_components" => Some(PhantomShape::TwoComponents { radius_vox: 2.0 }),
            "nested_labels" => Some(PhantomShape::NestedLabels),
            "full_brainlike" => Some(PhantomShape::FullBrainlike { scale: 1.0 }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub shape: PhantomShape,
    pub size: Dims,
    pub spacing: (Real, Real, Real),
    /// Label written by single-tissue shapes; multi-label shapes ignore it.
    pub label: TissueLabel,
    pub case_id: String,
}

impl PhantomSpec {
    /// Per-tissue Betti triples this phantom is constructed to have.
    pub fn expected_betti(&self) -> Vec<(TissueLabel, BettiTriple)> {
        match self.shape {
            PhantomShape::SolidBall { .. } => vec![(self.label, BettiTriple::new(1, 0, 0))],
            PhantomShape::HollowShell => vec![(self.label, BettiTriple::new(1, 0, 1))],
            PhantomShape::VoxelTorus => vec![(self.label, BettiTriple::new(1, 1, 0))],
            PhantomShape::TwoComponents { .. } => vec![(self.label, BettiTriple::new(2, 0, 0))],
            PhantomShape::NestedLabels => vec![
                (TissueLabel::Wm, BettiTriple::new(1, 0, 0)),
                (TissueLabel::Gm, BettiTriple::new(1, 0, 1)),
                (TissueLabel::Ecsf, BettiTriple::new(1, 0, 1)),
            ],
            PhantomShape::FullBrainlike { .. } => TissueLabel::SCORED
                .iter()
                .map(|&t| {
                    let b0 = if t == TissueLabel::Gm { 2 } else { 1 };
                    (t, BettiTriple::new(b0, 0, 0))
                })
                .collect(),
        }
    }
}

struct Canvas {
    dims: Dims,
    voxels: Vec<u8>,
}

impl Canvas {
    fn new(dims: Dims) -> Canvas {
        Canvas { dims, voxels: vec![0; dims.0 * dims.1 * dims.2] }
    }

    fn paint_ball(&mut self, center: (f64, f64, f64), radius: f64, code: u8) {
        let (nx, ny, nz) = self.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let d2 = (x as f64 - center.0).powi(2)
                        + (y as f64 - center.1).powi(2)
                        + (z as f64 - center.2).powi(2);
                    if d2 <= radius * radius {
                        self.voxels[x + nx * (y + ny * z)] = code;
                    }
                }
            }
        }
    }

    fn paint_box(&mut self, lo: (usize, usize, usize), hi: (usize, usize, usize), code: u8) {
        let (nx, ny, _) = self.dims;
        for z in lo.2..=hi.2 {
            for y in lo.1..=hi.1 {
                for x in lo.0..=hi.0 {
                    self.voxels[x + nx * (y + ny * z)] = code;
                }
            }
        }
    }
}

fn require_fit(spec: &PhantomSpec, needed: usize, what: &str) -> Result<()> {
    let min_dim = spec.size.0.min(spec.size.1).min(spec.size.2);
    if min_dim < needed {
        return Err(Error::PhantomSpec(format!(
            "{what} needs a grid of at least {needed}^3, got {:?}",
            spec.size
        )));
    }
    Ok(())
}

/// Deterministic phantom generation: equal specs yield bit-identical volumes.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<LabelVolume> {
    if spec.label == TissueLabel::Background {
        return Err(Error::PhantomSpec("phantom label must be a scored tissue".into()));
    }
    let mut canvas = Canvas::new(spec.size);
    let code = spec.label.code();
    let center = (
        (spec.size.0 as f64 - 1.0) / 2.0,
        (spec.size.1 as f64 - 1.0) / 2.0,
        (spec.size.2 as f64 - 1.0) / 2.0,
    );

    match &spec.shape {
        PhantomShape::SolidBall { radius_vox } => {
            let r = *radius_vox;
            if r < 0.5 {
                return Err(Error::PhantomSpec(format!("ball radius {r} too small")));
            }
            let min_half = center.0.min(center.1).min(center.2);
            if r > min_half {
                return Err(Error::PhantomSpec(format!(
                    "ball radius {r} does not fit grid {:?}",
                    spec.size
                )));
            }
            canvas.paint_ball(center, r, code);
        }
        PhantomShape::HollowShell => {
            require_fit(spec, 3, "hollow_shell")?;
            let c = (center.0 as usize, center.1 as usize, center.2 as usize);
            canvas.paint_box((c.0 - 1, c.1 - 1, c.2 - 1), (c.0 + 1, c.1 + 1, c.2 + 1), code);
            canvas.voxels[c.0 + spec.size.0 * (c.1 + spec.size.1 * c.2)] = 0;
        }
        PhantomShape::VoxelTorus => {
            require_fit(spec, 3, "voxel_torus")?;
            let c = (center.0 as usize, center.1 as usize, center.2 as usize);
            canvas.paint_box((c.0 - 1, c.1 - 1, c.2), (c.0 + 1, c.1 + 1, c.2), code);
            canvas.voxels[c.0 + spec.size.0 * (c.1 + spec.size.1 * c.2)] = 0;
        }
        PhantomShape::TwoComponents { radius_vox } => {
            let r = *radius_vox;
            let quarter = (spec.size.0 as f64 - 1.0) / 4.0;
            let left = (quarter, center.1, center.2);
            let right = (3.0 * quarter, center.1, center.2);
            // 26-separation: bounding boxes must be more than one voxel apart.
            if right.0 - r <= left.0 + r + 1.5 || r > center.1.min(center.2) || r > quarter || r < 0.5 {
                return Err(Error::PhantomSpec(format!(
                    "two balls of radius {r} do not fit grid {:?} with a separating gap",
                    spec.size
                )));
            }
            canvas.paint_ball(left, r, code);
            canvas.paint_ball(right, r, code);
        }
        PhantomShape::NestedLabels => {
            require_fit(spec, 9, "nested_labels")?;
            let c = (center.0 as usize, center.1 as usize, center.2 as usize);
            // Concentric cubes: eCSF shell, GM shell, WM core.
            canvas.paint_box((c.0 - 4, c.1 - 4, c.2 - 4), (c.0 + 4, c.1 + 4, c.2 + 4), TissueLabel::Ecsf.code());
            canvas.paint_box((c.0 - 3, c.1 - 3, c.2 - 3), (c.0 + 3, c.1 + 3, c.2 + 3), TissueLabel::Gm.code());
            canvas.paint_box((c.0 - 2, c.1 - 2, c.2 - 2), (c.0 + 2, c.1 + 2, c.2 + 2), TissueLabel::Wm.code());
        }
        PhantomShape::FullBrainlike { scale } => {
            let scale = *scale;
            if !(0.1..=4.0).contains(&scale) {
                return Err(Error::PhantomSpec(format!("brainlike scale {scale} out of range")));
            }
            let min_half = center.0.min(center.1).min(center.2);
            // Central WM ball with satellite tissues on the axis directions;
            // GM appears twice for its expected two components.
            let big = (min_half * 0.38 * scale).floor();
            let small = (big * 0.5).floor();
            let dist = big + small + 3.0;
            if big < 2.0 || small < 1.5 || dist + small + 1.0 > min_half {
                return Err(Error::PhantomSpec(format!(
                    "brainlike phantom at scale {scale} does not fit grid {:?}",
                    spec.size
                )));
            }
            canvas.paint_ball(center, big, TissueLabel::Wm.code());
            let diag = dist / 3.0f64.sqrt();
            let satellites: [(f64, f64, f64, u8); 7] = [
                (dist, 0.0, 0.0, TissueLabel::Gm.code()),
                (-dist, 0.0, 0.0, TissueLabel::Gm.code()),
                (0.0, dist, 0.0, TissueLabel::Ecsf.code()),
                (0.0, -dist, 0.0, TissueLabel::Ventricles.code()),
                (0.0, 0.0, dist, TissueLabel::Cerebellum.code()),
                (0.0, 0.0, -dist, TissueLabel::DeepGm.code()),
                (diag, diag, diag, TissueLabel::Brainstem.code()),
            ];
            for &(dx, dy, dz, sat_code) in &satellites {
                canvas.paint_ball((center.0 + dx, center.1 + dy, center.2 + dz), small, sat_code);
            }
        }
    }

    LabelVolume::new(spec.size, spec.spacing, canvas.voxels, &spec.case_id)
}

/// Controlled error pattern applied to a prediction volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorPattern {
    None,
    /// One 6-neighborhood dilation of the tissue into background voxels.
    Dilate,
    /// Remove the tissue's 6-boundary voxels.
    Erode,
    /// Cut the tissue with a one-voxel background plane, adding a component.
    SplitComponent,
    /// Drill a one-voxel tunnel through the tissue along z, adding a hole.
    PunchHole,
    /// Remove the tissue entirely, exercising the missing-label path.
    DropLabel,
}

impl ErrorPattern {
    pub fn parse(token: &str) -> Option<ErrorPattern> {
        match token.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "none" => Some(ErrorPattern::None),
            "dilate" => Some(ErrorPattern::Dilate),
            "erode" => Some(ErrorPattern::Erode),
            "split-component" => Some(ErrorPattern::SplitComponent),
            "punch-hole" => Some(ErrorPattern::PunchHole),
            "drop-label" => Some(ErrorPattern::DropLabel),
            _ => None,
        }
    }
}

/// Applies an error pattern to one tissue of a volume, returning the
/// perturbed copy.
pub fn apply_error_pattern(
    vol: &LabelVolume,
    label: TissueLabel,
    pattern: ErrorPattern,
) -> Result<LabelVolume> {
    if label == TissueLabel::Background {
        return Err(Error::PhantomSpec("error patterns target a scored tissue".into()));
    }
    let (nx, ny, nz) = vol.dims();
    let code = label.code();
    let mut voxels = vol.voxels().to_vec();
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);

    let tissue_voxels: Vec<(usize, usize, usize)> = {
        let mut v = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if voxels[idx(x, y, z)] == code {
                        v.push((x, y, z));
                    }
                }
            }
        }
        v
    };
    if tissue_voxels.is_empty() && pattern != ErrorPattern::None {
        return Err(Error::PhantomSpec(format!(
            "volume {:?} has no {label} voxels to perturb",
            vol.case_id()
        )));
    }

    match pattern {
        ErrorPattern::None => {}
        ErrorPattern::Dilate => {
            let mut grow = Vec::new();
            for &(x, y, z) in &tissue_voxels {
                let mut push = |x: usize, y: usize, z: usize| {
                    if voxels[idx(x, y, z)] == 0 {
                        grow.push(idx(x, y, z));
                    }
                };
                if x > 0 {
                    push(x - 1, y, z);
                }
                if x + 1 < nx {
                    push(x + 1, y, z);
                }
                if y > 0 {
                    push(x, y - 1, z);
                }
                if y + 1 < ny {
                    push(x, y + 1, z);
                }
                if z > 0 {
                    push(x, y, z - 1);
                }
                if z + 1 < nz {
                    push(x, y, z + 1);
                }
            }
            for i in grow {
                voxels[i] = code;
            }
        }
        ErrorPattern::Erode => {
            let mut shrink = Vec::new();
            for &(x, y, z) in &tissue_voxels {
                let boundary = x == 0
                    || voxels[idx(x - 1, y, z)] != code
                    || x + 1 == nx
                    || voxels[idx(x + 1, y, z)] != code
                    || y == 0
                    || voxels[idx(x, y - 1, z)] != code
                    || y + 1 == ny
                    || voxels[idx(x, y + 1, z)] != code
                    || z == 0
                    || voxels[idx(x, y, z - 1)] != code
                    || z + 1 == nz
                    || voxels[idx(x, y, z + 1)] != code;
                if boundary {
                    shrink.push(idx(x, y, z));
                }
            }
            if shrink.len() == tissue_voxels.len() {
                return Err(Error::PhantomSpec(format!(
                    "eroding {label} would remove it entirely; use drop-label instead"
                )));
            }
            for i in shrink {
                voxels[i] = 0;
            }
        }
        ErrorPattern::SplitComponent => {
            let xs: Vec<usize> = tissue_voxels.iter().map(|&(x, _, _)| x).collect();
            let (min_x, max_x) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
            if max_x - min_x < 4 {
                return Err(Error::PhantomSpec(format!(
                    "{label} extent too small to split with a separating plane"
                )));
            }
            let cut = (min_x + max_x) / 2;
            for &(x, y, z) in &tissue_voxels {
                if x == cut {
                    voxels[idx(x, y, z)] = 0;
                }
            }
        }
        ErrorPattern::PunchHole => {
            // Drill through the centroid column; requires the column to cross
            // the blob so the removal makes a tunnel rather than a dent.
            let n = tissue_voxels.len() as f64;
            let cx = (tissue_voxels.iter().map(|&(x, _, _)| x).sum::<usize>() as f64 / n).round() as usize;
            let cy = (tissue_voxels.iter().map(|&(_, y, _)| y).sum::<usize>() as f64 / n).round() as usize;
            let mut removed = 0;
            for z in 0..nz {
                if voxels[idx(cx, cy, z)] == code {
                    voxels[idx(cx, cy, z)] = 0;
                    removed += 1;
                }
            }
            if removed < 3 {
                return Err(Error::PhantomSpec(format!(
                    "{label} too thin along z at its centroid to punch a tunnel"
                )));
            }
        }
        ErrorPattern::DropLabel => {
            for &(x, y, z) in &tissue_voxels {
                voxels[idx(x, y, z)] = 0;
            }
        }
    }

    LabelVolume::new(vol.dims(), vol.spacing(), voxels, vol.case_id())
}
