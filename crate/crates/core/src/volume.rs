//! Label volumes, tissue labels, and binary mask views.
//!
//! A [`LabelVolume`] is a dense 3D grid of tissue codes with physical voxel
//! spacing in millimeters. Codes live in the fixed alphabet `{0..7}`:
//! 0 is background, 1–7 are the scored fetal brain tissues in listing order
//! (eCSF, GM, WM, ventricles, cerebellum, deep GM, brainstem). The module also
//! implements the `LV1` plain-text sidecar format used by test fixtures.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::{Dims, Real};

/// Highest valid tissue code; the label alphabet is `0..=LABEL_CODE_MAX`.
pub const LABEL_CODE_MAX: u8 = 7;

/// One of the eight label classes (background plus seven scored tissues).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TissueLabel {
    Background,
    Ecsf,
    Gm,
    Wm,
    Ventricles,
    Cerebellum,
    DeepGm,
    Brainstem,
}

impl TissueLabel {
    /// The seven scored tissues, in code order.
    pub const SCORED: [TissueLabel; 7] = [
        TissueLabel::Ecsf,
        TissueLabel::Gm,
        TissueLabel::Wm,
        TissueLabel::Ventricles,
        TissueLabel::Cerebellum,
        TissueLabel::DeepGm,
        TissueLabel::Brainstem,
    ];

    pub fn code(self) -> u8 {
        match self {
            TissueLabel::Background => 0,
            TissueLabel::Ecsf => 1,
            TissueLabel::Gm => 2,
            TissueLabel::Wm => 3,
            TissueLabel::Ventricles => 4,
            TissueLabel::Cerebellum => 5,
            TissueLabel::DeepGm => 6,
            TissueLabel::Brainstem => 7,
        }
    }

    pub fn from_code(code: u8) -> Option<TissueLabel> {
        match code {
            0 => Some(TissueLabel::Background),
            1 => Some(TissueLabel::Ecsf),
            2 => Some(TissueLabel::Gm),
            3 => Some(TissueLabel::Wm),
            4 => Some(TissueLabel::Ventricles),
            5 => Some(TissueLabel::Cerebellum),
            6 => Some(TissueLabel::DeepGm),
            7 => Some(TissueLabel::Brainstem),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TissueLabel::Background => "background",
            TissueLabel::Ecsf => "eCSF",
            TissueLabel::Gm => "GM",
            TissueLabel::Wm => "WM",
            TissueLabel::Ventricles => "ventricles",
            TissueLabel::Cerebellum => "cerebellum",
            TissueLabel::DeepGm => "deepGM",
            TissueLabel::Brainstem => "brainstem",
        }
    }

    /// Case-insensitive lookup by name; also accepts the numeric code.
    pub fn from_name(name: &str) -> Option<TissueLabel> {
        let lower = name.trim().to_ascii_lowercase();
        for code in 0..=LABEL_CODE_MAX {
            let label = TissueLabel::from_code(code).unwrap();
            if label.name().to_ascii_lowercase() == lower {
                return Some(label);
            }
        }
        lower.parse::<u8>().ok().and_then(TissueLabel::from_code)
    }
}

impl fmt::Display for TissueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense 3D grid of tissue codes with millimeter spacing. Immutable after
/// construction and safe to share across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume<F: Scalar = Real> {
    dims: Dims,
    spacing: (F, F, F),
    voxels: Vec<u8>,
    case_id: String,
}

impl<F: Scalar> LabelVolume<F> {
    /// Validates every structural invariant: positive extents and spacing,
    /// voxel count matching the extents, and all codes within the alphabet.
    pub fn new(dims: Dims, spacing: (F, F, F), voxels: Vec<u8>, case_id: &str) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Data(format!(
                "volume {case_id:?}: dimensions must be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        let zero = F::zero();
        if spacing.0 <= zero || spacing.1 <= zero || spacing.2 <= zero {
            return Err(Error::Data(format!(
                "volume {case_id:?}: spacing must be positive, got ({}, {}, {})",
                spacing.0, spacing.1, spacing.2
            )));
        }
        let expected = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::Data(format!("volume {case_id:?}: dimension overflow")))?;
        if voxels.len() != expected {
            return Err(Error::Data(format!(
                "volume {case_id:?}: expected {expected} voxels for {nx}x{ny}x{nz}, got {}",
                voxels.len()
            )));
        }
        if let Some(pos) = voxels.iter().position(|&v| v > LABEL_CODE_MAX) {
            return Err(Error::Alphabet(format!(
                "volume {case_id:?}: code {} at linear index {pos} outside alphabet 0..={LABEL_CODE_MAX}",
                voxels[pos]
            )));
        }
        Ok(LabelVolume { dims, spacing, voxels, case_id: case_id.to_string() })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> (F, F, F) {
        self.spacing
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.index(x, y, z)]
    }

    /// Voxel count per label code.
    pub fn label_counts(&self) -> [u64; 8] {
        let mut counts = [0u64; 8];
        for &v in &self.voxels {
            counts[v as usize] += 1;
        }
        counts
    }

    /// Binary mask view of one scored tissue. Background is never scored.
    pub fn binary_mask(&self, label: TissueLabel) -> Result<BinaryMask<F>> {
        if label == TissueLabel::Background {
            return Err(Error::Alphabet(
                "background (code 0) is never scored; request a tissue code 1..=7".into(),
            ));
        }
        let code = label.code();
        let data = self.voxels.iter().map(|&v| v == code).collect();
        BinaryMask::new(self.dims, self.spacing, data)
    }
}

/// 3D boolean grid sharing the parent volume's dimensions and spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask<F: Scalar = Real> {
    dims: Dims,
    spacing: (F, F, F),
    data: Vec<bool>,
}

impl<F: Scalar> BinaryMask<F> {
    pub fn new(dims: Dims, spacing: (F, F, F), data: Vec<bool>) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if data.len() != nx * ny * nz {
            return Err(Error::Shape(format!(
                "mask data length {} does not match dims {nx}x{ny}x{nz}",
                data.len()
            )));
        }
        Ok(BinaryMask { dims, spacing, data })
    }

    pub fn from_fn(dims: Dims, spacing: (F, F, F), mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let (nx, ny, nz) = dims;
        let mut data = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z));
                }
            }
        }
        BinaryMask { dims, spacing, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> (F, F, F) {
        self.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.index(x, y, z)]
    }

    pub fn count_true(&self) -> u64 {
        self.data.iter().filter(|&&v| v).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Tight bounding box of the foreground as inclusive `(min, max)` corners,
    /// or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<(Dims, Dims)> {
        let (nx, ny, nz) = self.dims;
        let mut min = (usize::MAX, usize::MAX, usize::MAX);
        let mut max = (0usize, 0usize, 0usize);
        let mut any = false;
        let mut idx = 0;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if self.data[idx] {
                        any = true;
                        min = (min.0.min(x), min.1.min(y), min.2.min(z));
                        max = (max.0.max(x), max.1.max(y), max.2.max(z));
                    }
                    idx += 1;
                }
            }
        }
        any.then_some((min, max))
    }
}

/// Writes the `LV1` sidecar: a header line `LV1 nx ny nz sx sy sz` followed by
/// the voxel codes in x-fastest order, one grid row per line.
pub fn write_sidecar<F: Scalar, W: Write>(vol: &LabelVolume<F>, mut w: W) -> Result<()> {
    let (nx, ny, nz) = vol.dims();
    let (sx, sy, sz) = vol.spacing();
    writeln!(w, "LV1 {nx} {ny} {nz} {sx} {sy} {sz}")?;
    for z in 0..nz {
        for y in 0..ny {
            let mut line = String::with_capacity(2 * nx);
            for x in 0..nx {
                if x > 0 {
                    line.push(' ');
                }
                line.push_str(itoa_u8(vol.get(x, y, z)));
            }
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

fn itoa_u8(v: u8) -> &'static str {
    const DIGITS: [&str; 8] = ["0", "1", "2", "3", "4", "5", "6", "7"];
    DIGITS[v as usize]
}

pub fn write_sidecar_file<F: Scalar>(vol: &LabelVolume<F>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_sidecar(vol, std::io::BufWriter::new(file))
}

/// Reads the `LV1` sidecar format. Codes may be separated by any whitespace.
pub fn read_sidecar<F: Scalar, R: Read>(r: R, case_id: &str) -> Result<LabelVolume<F>> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 7 || fields[0] != "LV1" {
        return Err(Error::Format(format!(
            "sidecar {case_id:?}: expected header 'LV1 nx ny nz sx sy sz', got {header:?}"
        )));
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Format(format!("sidecar {case_id:?}: bad dimension {s:?}")))
    };
    let sp = |s: &str| -> Result<F> {
        s.parse()
            .map_err(|_| Error::Format(format!("sidecar {case_id:?}: bad spacing {s:?}")))
    };
    let dims = (dim(fields[1])?, dim(fields[2])?, dim(fields[3])?);
    let spacing = (sp(fields[4])?, sp(fields[5])?, sp(fields[6])?);
    let expected = dims.0 * dims.1 * dims.2;
    let mut voxels = Vec::with_capacity(expected);
    let mut body = String::new();
    reader.read_to_string(&mut body)?;
    for tok in body.split_whitespace() {
        let v: u8 = tok
            .parse()
            .map_err(|_| Error::Format(format!("sidecar {case_id:?}: bad voxel code {tok:?}")))?;
        voxels.push(v);
    }
    LabelVolume::new(dims, spacing, voxels, case_id)
}

pub fn read_sidecar_file<F: Scalar>(path: &Path) -> Result<LabelVolume<F>> {
    let case_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    read_sidecar(file, &case_id)
}
