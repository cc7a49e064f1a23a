//! Mask surfaces and the robust (percentile) Hausdorff distance.
//!
//! A surface is the set of foreground voxels with at least one 6-neighbor
//! outside the mask; the grid boundary counts as outside. Surface voxels are
//! represented by their centers in millimeters (index times spacing),
//! unweighted. Directed nearest-surface distances are exact Euclidean values
//! computed through the separable distance transform of [`crate::edt`],
//! restricted to the joint bounding box of the two surfaces.

use crate::edt::squared_edt_3d;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::percentile_sorted;
use crate::volume::BinaryMask;
use crate::{Dims, Real};

/// Surface voxels of a mask, kept as grid indices plus the spacing needed to
/// place them in millimeters.
#[derive(Clone, Debug)]
pub struct SurfacePointSet<F: Scalar = Real> {
    dims: Dims,
    spacing: (F, F, F),
    indices: Vec<(u32, u32, u32)>,
}

impl<F: Scalar> SurfacePointSet<F> {
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> (F, F, F) {
        self.spacing
    }

    pub fn indices(&self) -> &[(u32, u32, u32)] {
        &self.indices
    }

    /// Voxel-center coordinates in millimeters, in extraction order.
    pub fn points(&self) -> impl Iterator<Item = [F; 3]> + '_ {
        let (sx, sy, sz) = self.spacing;
        self.indices.iter().map(move |&(x, y, z)| {
            [F::of_usize(x as usize) * sx, F::of_usize(y as usize) * sy, F::of_usize(z as usize) * sz]
        })
    }
}

/// Extracts the 6-connectivity boundary voxels of a nonempty mask, in scan
/// order.
pub fn extract_surface<F: Scalar>(mask: &BinaryMask<F>) -> Result<SurfacePointSet<F>> {
    let (nx, ny, nz) = mask.dims();
    let data = mask.data();
    let mut indices = Vec::new();
    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if data[idx] {
                    let boundary = x == 0
                        || !data[idx - 1]
                        || x + 1 == nx
                        || !data[idx + 1]
                        || y == 0
                        || !data[idx - nx]
                        || y + 1 == ny
                        || !data[idx + nx]
                        || z == 0
                        || !data[idx - nx * ny]
                        || z + 1 == nz
                        || !data[idx + nx * ny];
                    if boundary {
                        indices.push((x as u32, y as u32, z as u32));
                    }
                }
                idx += 1;
            }
        }
    }
    if indices.is_empty() {
        return Err(Error::EmptyMask("cannot extract a surface from an empty mask".into()));
    }
    Ok(SurfacePointSet { dims: mask.dims(), spacing: mask.spacing(), indices })
}

fn check_compatible<F: Scalar>(a: &SurfacePointSet<F>, b: &SurfacePointSet<F>) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::Shape(format!(
            "surface grids differ: {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    let rel = |x: F, y: F| {
        let diff = (x - y).abs();
        let scale = x.abs().max(y.abs()).max(F::epsilon());
        (diff / scale).to_f64_lossy()
    };
    if rel(a.spacing.0, b.spacing.0) > 1e-6
        || rel(a.spacing.1, b.spacing.1) > 1e-6
        || rel(a.spacing.2, b.spacing.2) > 1e-6
    {
        return Err(Error::Shape(format!(
            "surface spacings differ beyond 1e-6 relative: {:?} vs {:?}",
            (a.spacing.0.to_f64_lossy(), a.spacing.1.to_f64_lossy(), a.spacing.2.to_f64_lossy()),
            (b.spacing.0.to_f64_lossy(), b.spacing.1.to_f64_lossy(), b.spacing.2.to_f64_lossy()),
        )));
    }
    Ok(())
}

/// For each point of `from`, the exact Euclidean distance in millimeters to
/// the nearest point of `to`. Output order matches input order.
pub fn directed_distances<F: Scalar>(
    from: &SurfacePointSet<F>,
    to: &SurfacePointSet<F>,
) -> Result<Vec<F>> {
    if from.indices.is_empty() || to.indices.is_empty() {
        return Err(Error::EmptyMask("directed distances need two nonempty surfaces".into()));
    }
    check_compatible(from, to)?;

    // Joint bounding box of both point sets; sites and queries both live
    // inside it, so the transform restricted to the box is exact.
    let mut min = (u32::MAX, u32::MAX, u32::MAX);
    let mut max = (0u32, 0u32, 0u32);
    for &(x, y, z) in from.indices.iter().chain(&to.indices) {
        min = (min.0.min(x), min.1.min(y), min.2.min(z));
        max = (max.0.max(x), max.1.max(y), max.2.max(z));
    }
    let dims = (
        (max.0 - min.0 + 1) as usize,
        (max.1 - min.1 + 1) as usize,
        (max.2 - min.2 + 1) as usize,
    );
    let mut sites = vec![false; dims.0 * dims.1 * dims.2];
    for &(x, y, z) in &to.indices {
        let idx = (x - min.0) as usize
            + dims.0 * ((y - min.1) as usize + dims.1 * (z - min.2) as usize);
        sites[idx] = true;
    }
    let sq = squared_edt_3d(&sites, dims, to.spacing);
    let out = from
        .indices
        .iter()
        .map(|&(x, y, z)| {
            let idx = (x - min.0) as usize
                + dims.0 * ((y - min.1) as usize + dims.1 * (z - min.2) as usize);
            sq[idx].sqrt()
        })
        .collect();
    Ok(out)
}

/// Robust symmetric Hausdorff distance: the maximum of the two directed
/// distance percentiles (linear interpolation over the sorted lists).
pub fn robust_hausdorff<F: Scalar>(
    pred: &SurfacePointSet<F>,
    gt: &SurfacePointSet<F>,
    percentile: F,
) -> Result<F> {
    let mut forward = directed_distances(pred, gt)?;
    let mut backward = directed_distances(gt, pred)?;
    forward.sort_by(|a, b| a.partial_cmp(b).unwrap());
    backward.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f = percentile_sorted(&forward, percentile);
    let b = percentile_sorted(&backward, percentile);
    Ok(f.max(b))
}

/// 95th-percentile Hausdorff distance in millimeters.
pub fn hd95<F: Scalar>(pred: &SurfacePointSet<F>, gt: &SurfacePointSet<F>) -> Result<F> {
    robust_hausdorff(pred, gt, F::of_f64(95.0))
}
