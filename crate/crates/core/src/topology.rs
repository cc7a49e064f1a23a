//! Betti numbers of 3D binary masks via the voxel cubical complex.
//!
//! A mask is read as the union of closed unit cubes, one per foreground voxel.
//! Component counting uses the standard 26/6 dual pair: foreground components
//! under 26-connectivity, cavities as 6-connected components of the padded
//! complement minus the single outer component. The first Betti number comes
//! from the Euler–Poincaré identity `b1 = b0 + b2 - chi`, where `chi` is the
//! Euler characteristic `V - E + F - C` over the unique vertices, edges, faces,
//! and cubes contributed by the foreground.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{BinaryMask, TissueLabel};

/// Voxel neighborhood used for component labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    pub fn from_neighbors(n: u8) -> Option<Connectivity> {
        match n {
            6 => Some(Connectivity::Six),
            18 => Some(Connectivity::Eighteen),
            26 => Some(Connectivity::TwentySix),
        _ => None,
        }
    }

    pub fn neighbors(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Background connectivity paired with this foreground connectivity so
    /// that component and cavity counts stay topologically consistent.
    pub fn dual(self) -> Connectivity {
        match self {
            Connectivity::TwentySix | Connectivity::Eighteen => Connectivity::Six,
            Connectivity::Six => Connectivity::TwentySix,
        }
    }

    /// Scan-order predecessors of the neighborhood: offsets that point to
    /// already-visited voxels when traversing x-fastest.
    fn predecessor_offsets(self) -> Vec<(i64, i64, i64)> {
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    let preceding = dz < 0 || (dz == 0 && dy < 0) || (dz == 0 && dy == 0 && dx < 0);
                    if !preceding {
                        continue;
                    }
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::Eighteen => manhattan <= 2,
                        Connectivity::TwentySix => true,
                    };
                    if keep {
                        out.push((dx, dy, dz));
                    }
                }
            }
        }
        out
    }
}

/// Component labeling result: `labels[i]` is 0 for background, otherwise a
/// component id in `1..=count` assigned in scan order of first appearance.
#[derive(Clone, Debug)]
pub struct ComponentLabels {
    pub count: usize,
    pub labels: Vec<u32>,
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // attach larger root id under smaller, keeping ids scan-stable
            if ra < rb {
                self.parent[rb as usize] = ra;
            } else {
                self.parent[ra as usize] = rb;
            }
        }
    }
}

fn components_on_grid(
    data: &[bool],
    dims: (usize, usize, usize),
    conn: Connectivity,
) -> ComponentLabels {
    let (nx, ny, nz) = dims;
    let n = nx * ny * nz;
    debug_assert_eq!(data.len(), n);
    let offsets = conn.predecessor_offsets();
    let mut ds = DisjointSet::new(n);

    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if data[idx] {
                    for &(dx, dy, dz) in &offsets {
                        let px = x as i64 + dx;
                        let py = y as i64 + dy;
                        let pz = z as i64 + dz;
                        if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 {
                            continue;
                        }
                        debug_assert!(pz < nz as i64);
                        let pidx = px as usize + nx * (py as usize + ny * pz as usize);
                        if data[pidx] {
                            ds.union(idx as u32, pidx as u32);
                        }
                    }
                }
                idx += 1;
            }
        }
    }

    let mut labels = vec![0u32; n];
    let mut remap = vec![0u32; n];
    let mut count = 0u32;
    for i in 0..n {
        if data[i] {
            let root = ds.find(i as u32) as usize;
            if remap[root] == 0 {
                count += 1;
                remap[root] = count;
            }
            labels[i] = remap[root];
        }
    }
    ComponentLabels { count: count as usize, labels }
}

/// Maximal connected foreground regions under the given neighborhood.
pub fn connected_components<F: Scalar>(mask: &BinaryMask<F>, conn: Connectivity) -> ComponentLabels {
    components_on_grid(mask.data(), mask.dims(), conn)
}

/// Euler characteristic contribution of the cells whose minimal lattice corner
/// sits at a vertex with the given 2x2x2 occupancy pattern.
///
/// Bit layout: `bit = bx*4 + by*2 + bz`, where the voxel at `(bx, by, bz)`
/// relative offset occupies the block; `bx = 1` is the voxel sharing the
/// vertex's own x-coordinate. Each unique vertex/edge/face/cube of the complex
/// is owned by exactly one lattice vertex, so the per-vertex contributions sum
/// to `V - E + F - C`.
#[inline]
fn chi_contribution(pattern: u8) -> i64 {
    if pattern == 0 {
        return 0;
    }
    let vertex = 1i64;
    let ex = (pattern & 0b1111_0000 != 0) as i64;
    let ey = (pattern & 0b1100_1100 != 0) as i64;
    let ez = (pattern & 0b1010_1010 != 0) as i64;
    let fxy = (pattern & 0b1100_0000 != 0) as i64;
    let fxz = (pattern & 0b1010_0000 != 0) as i64;
    let fyz = (pattern & 0b1000_1000 != 0) as i64;
    let cube = (pattern & 0b1000_0000 != 0) as i64;
    vertex - (ex + ey + ez) + (fxy + fxz + fyz) - cube
}

fn euler_on_grid(data: &[bool], dims: (usize, usize, usize)) -> i64 {
    let (nx, ny, nz) = dims;
    let at = |x: i64, y: i64, z: i64| -> bool {
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            false
        } else {
            data[x as usize + nx * (y as usize + ny * z as usize)]
        }
    };
    // Gather the 4 bits of one x-column of the 2x2x2 block: voxels
    // (x, j-1 + by, k-1 + bz) for (by, bz) in {0,1}^2.
    let column_bits = |x: i64, j: i64, k: i64| -> u8 {
        let mut bits = 0u8;
        if at(x, j - 1, k - 1) {
            bits |= 1 << 0;
        }
        if at(x, j - 1, k) {
            bits |= 1 << 1;
        }
        if at(x, j, k - 1) {
            bits |= 1 << 2;
        }
        if at(x, j, k) {
            bits |= 1 << 3;
        }
        bits
    };
    let mut chi = 0i64;
    for k in 0..=(nz as i64) {
        for j in 0..=(ny as i64) {
            // Slide the occupancy pattern along x: the high nibble (bx = 1)
            // becomes the low nibble (bx = 0) of the next vertex.
            let mut pattern = 0u8;
            for i in 0..=(nx as i64) {
                pattern = (pattern >> 4) | (column_bits(i, j, k) << 4);
                chi += chi_contribution(pattern);
            }
        }
    }
    chi
}

/// Euler characteristic `V - E + F - C` of the closed cubical complex whose
/// 3-cells are the foreground voxels.
pub fn euler_characteristic<F: Scalar>(mask: &BinaryMask<F>) -> i64 {
    match mask.bounding_box() {
        None => 0,
        Some((min, max)) => {
            let (data, dims) = crop(mask, min, max);
            euler_on_grid(&data, dims)
        }
    }
}

fn crop<F: Scalar>(
    mask: &BinaryMask<F>,
    min: (usize, usize, usize),
    max: (usize, usize, usize),
) -> (Vec<bool>, (usize, usize, usize)) {
    let dims = (max.0 - min.0 + 1, max.1 - min.1 + 1, max.2 - min.2 + 1);
    let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
    for z in min.2..=max.2 {
        for y in min.1..=max.1 {
            for x in min.0..=max.0 {
                data.push(mask.get(x, y, z));
            }
        }
    }
    (data, dims)
}

/// Counts of connected components, tunnels, and cavities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiTriple {
    pub b0: u32,
    pub b1: u32,
    pub b2: u32,
}

impl BettiTriple {
    pub const fn new(b0: u32, b1: u32, b2: u32) -> Self {
        BettiTriple { b0, b1, b2 }
    }
}

/// Betti numbers under the default 26/6 foreground/background pairing.
pub fn betti_numbers<F: Scalar>(mask: &BinaryMask<F>) -> Result<BettiTriple> {
    betti_numbers_with(mask, Connectivity::TwentySix)
}

/// Betti numbers with an explicit foreground connectivity; the background
/// side always uses its dual.
pub fn betti_numbers_with<F: Scalar>(
    mask: &BinaryMask<F>,
    fg_conn: Connectivity,
) -> Result<BettiTriple> {
    let Some((min, max)) = mask.bounding_box() else {
        return Ok(BettiTriple::new(0, 0, 0));
    };
    // All topology lives inside the foreground bounding box; cropping (plus a
    // one-voxel background pad for the complement) preserves every count.
    let (data, dims) = crop(mask, min, max);

    let b0 = components_on_grid(&data, dims, fg_conn).count as i64;

    let padded_dims = (dims.0 + 2, dims.1 + 2, dims.2 + 2);
    let mut complement = vec![true; padded_dims.0 * padded_dims.1 * padded_dims.2];
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                if data[x + dims.0 * (y + dims.1 * z)] {
                    let pidx = (x + 1) + padded_dims.0 * ((y + 1) + padded_dims.1 * (z + 1));
                    complement[pidx] = false;
                }
            }
        }
    }
    let bg_components = components_on_grid(&complement, padded_dims, fg_conn.dual()).count as i64;
    let b2 = bg_components - 1;

    let chi = euler_on_grid(&data, dims);
    let b1 = b0 + b2 - chi;
    if b1 < 0 || b2 < 0 {
        return Err(Error::Topology(format!(
            "negative Betti number (b0={b0}, b1={b1}, b2={b2}, chi={chi})"
        )));
    }
    Ok(BettiTriple::new(b0 as u32, b1 as u32, b2 as u32))
}

/// Anatomically expected Betti triple per tissue: every tissue is a single
/// solid component except GM, which is expected to split into two; no tissue
/// is expected to have tunnels or cavities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedTopology {
    per_tissue: [BettiTriple; 7],
}

impl Default for ExpectedTopology {
    fn default() -> Self {
        let mut per_tissue = [BettiTriple::new(1, 0, 0); 7];
        per_tissue[(TissueLabel::Gm.code() - 1) as usize] = BettiTriple::new(2, 0, 0);
        ExpectedTopology { per_tissue }
    }
}

impl ExpectedTopology {
    pub fn get(&self, tissue: TissueLabel) -> BettiTriple {
        assert_ne!(tissue, TissueLabel::Background, "background has no expected topology");
        self.per_tissue[(tissue.code() - 1) as usize]
    }
}

/// Betti number error per dimension. Integer when computed directly from a
/// prediction, possibly fractional after penalty substitution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BneTriple {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

impl BneTriple {
    pub const fn new(e0: f64, e1: f64, e2: f64) -> Self {
        BneTriple { e0, e1, e2 }
    }

    pub fn component(&self, k: usize) -> f64 {
        match k {
            0 => self.e0,
            1 => self.e1,
            2 => self.e2,
            _ => panic!("Betti dimension out of range: {k}"),
        }
    }
}

/// Absolute difference between the expected triple for the tissue and the
/// prediction's measured triple, per dimension.
pub fn betti_number_error(
    pred: &BettiTriple,
    tissue: TissueLabel,
    expected: &ExpectedTopology,
) -> BneTriple {
    let exp = expected.get(tissue);
    BneTriple::new(
        (exp.b0 as f64 - pred.b0 as f64).abs(),
        (exp.b1 as f64 - pred.b1 as f64).abs(),
        (exp.b2 as f64 - pred.b2 as f64).abs(),
    )
}
