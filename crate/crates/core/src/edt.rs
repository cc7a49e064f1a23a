//! Exact squared Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope-of-parabolas scan (Felzenszwalb & Huttenlocher),
//! one pass per axis with sample positions `index * spacing`. Exact for
//! squared distances up to floating-point rounding, which is what lets the
//! surface-distance pipeline match a brute-force nearest-neighbor oracle.

use crate::scalar::Scalar;
use crate::Dims;

/// Squared distance from every voxel center to the nearest `site` voxel
/// center, in millimeters squared. Voxels are `+inf` if there are no sites.
pub fn squared_edt_3d<F: Scalar>(sites: &[bool], dims: Dims, spacing: (F, F, F)) -> Vec<F> {
    let (nx, ny, nz) = dims;
    debug_assert_eq!(sites.len(), nx * ny * nz);
    let inf = F::infinity();
    let mut dist: Vec<F> = sites.iter().map(|&s| if s { F::zero() } else { inf }).collect();

    let max_dim = nx.max(ny).max(nz);
    let mut line = vec![F::zero(); max_dim];
    let mut out = vec![F::zero(); max_dim];
    let mut hull_idx = vec![0usize; max_dim];
    let mut hull_from = vec![F::zero(); max_dim + 1];

    // x pass: contiguous lines
    for z in 0..nz {
        for y in 0..ny {
            let base = nx * (y + ny * z);
            line[..nx].copy_from_slice(&dist[base..base + nx]);
            dt_line(&line[..nx], spacing.0, &mut out[..nx], &mut hull_idx, &mut hull_from);
            dist[base..base + nx].copy_from_slice(&out[..nx]);
        }
    }
    // y pass
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                line[y] = dist[x + nx * (y + ny * z)];
            }
            dt_line(&line[..ny], spacing.1, &mut out[..ny], &mut hull_idx, &mut hull_from);
            for y in 0..ny {
                dist[x + nx * (y + ny * z)] = out[y];
            }
        }
    }
    // z pass
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                line[z] = dist[x + nx * (y + ny * z)];
            }
            dt_line(&line[..nz], spacing.2, &mut out[..nz], &mut hull_idx, &mut hull_from);
            for z in 0..nz {
                dist[x + nx * (y + ny * z)] = out[z];
            }
        }
    }
    dist
}

/// 1D squared-distance transform along one axis: for each position `j`,
/// `out[j] = min_i ((x_j - x_i)^2 + f[i])` with `x_i = i * step`.
fn dt_line<F: Scalar>(f: &[F], step: F, out: &mut [F], hull_idx: &mut [usize], hull_from: &mut [F]) {
    let n = f.len();
    let inf = F::infinity();
    // Parabolas with infinite offset never win; skip them up front so the
    // intersection formula stays finite.
    let mut k_opt: Option<usize> = None;
    let pos = |i: usize| F::of_usize(i) * step;

    for q in 0..n {
        if f[q] == inf {
            continue;
        }
        match k_opt {
            None => {
                hull_idx[0] = q;
                hull_from[0] = -inf;
                hull_from[1] = inf;
                k_opt = Some(0);
            }
            Some(mut k) => {
                let xq = pos(q);
                let mut s;
                loop {
                    let p = hull_idx[k];
                    let xp = pos(p);
                    s = ((f[q] + xq * xq) - (f[p] + xp * xp))
                        / (F::of_f64(2.0) * (xq - xp));
                    if s <= hull_from[k] {
                        if k == 0 {
                            // q dominates the entire hull so far
                            hull_idx[0] = q;
                            hull_from[0] = -inf;
                            hull_from[1] = inf;
                            k_opt = Some(0);
                            break;
                        }
                        k -= 1;
                    } else {
                        k += 1;
                        hull_idx[k] = q;
                        hull_from[k] = s;
                        hull_from[k + 1] = inf;
                        k_opt = Some(k);
                        break;
                    }
                }
            }
        }
    }

    let Some(_) = k_opt else {
        out[..n].fill(inf);
        return;
    };

    let mut k = 0usize;
    for (j, slot) in out.iter_mut().enumerate().take(n) {
        let xj = pos(j);
        while hull_from[k + 1] < xj {
            k += 1;
        }
        let i = hull_idx[k];
        let d = xj - pos(i);
        *slot = d * d + f[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(sites: &[bool], dims: Dims, spacing: (f64, f64, f64)) -> Vec<f64> {
        let (nx, ny, nz) = dims;
        let mut site_pts = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if sites[x + nx * (y + ny * z)] {
                        site_pts.push((x as f64 * spacing.0, y as f64 * spacing.1, z as f64 * spacing.2));
                    }
                }
            }
        }
        let mut out = vec![f64::INFINITY; nx * ny * nz];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let p = (x as f64 * spacing.0, y as f64 * spacing.1, z as f64 * spacing.2);
                    let mut best = f64::INFINITY;
                    for s in &site_pts {
                        let d = (p.0 - s.0).powi(2) + (p.1 - s.1).powi(2) + (p.2 - s.2).powi(2);
                        best = best.min(d);
                    }
                    out[x + nx * (y + ny * z)] = best;
                }
            }
        }
        out
    }

    #[test]
    fn single_site_line() {
        let dims = (5, 1, 1);
        let mut sites = vec![false; 5];
        sites[1] = true;
        let d = squared_edt_3d(&sites, dims, (2.0, 1.0, 1.0));
        assert_eq!(d, vec![4.0, 0.0, 4.0, 16.0, 36.0]);
    }

    #[test]
    fn no_sites_gives_infinity() {
        let d = squared_edt_3d::<f64>(&[false; 8], (2, 2, 2), (1.0, 1.0, 1.0));
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut state = 0xABCDEF0123456789u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..40 {
            let dims = (1 + (next() % 7) as usize, 1 + (next() % 7) as usize, 1 + (next() % 7) as usize);
            let spacing = (
                0.25 + (next() % 8) as f64 * 0.25,
                0.25 + (next() % 8) as f64 * 0.25,
                0.25 + (next() % 8) as f64 * 0.25,
            );
            let n = dims.0 * dims.1 * dims.2;
            let sites: Vec<bool> = (0..n).map(|_| next() % 4 == 0).collect();
            if !sites.iter().any(|&s| s) {
                continue;
            }
            let fast = squared_edt_3d(&sites, dims, spacing);
            let brute = brute_force(&sites, dims, spacing);
            for i in 0..n {
                assert!(
                    (fast[i] - brute[i]).abs() <= 1e-9 * brute[i].max(1.0),
                    "trial {trial} voxel {i}: {} vs {}",
                    fast[i],
                    brute[i]
                );
            }
        }
    }
}
