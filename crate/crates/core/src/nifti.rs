//! Minimal NIfTI-1 reader and writer for integer label maps.
//!
//! Supports single-file volumes (magic `n+1\0`) and header/image pairs
//! (magic `ni1\0`), little- or big-endian headers auto-detected through
//! `sizeof_hdr == 348`, optional gzip (detected by content, not extension),
//! and the datatypes used for label maps: unsigned 8-bit, signed 8/16/32-bit,
//! unsigned 16-bit, and integral-valued 32-bit float. `scl_slope`/`scl_inter`
//! are applied when set; the scaled values must still be integers.
//!
//! Orientation matrices are deliberately ignored: predictions are required to
//! share the ground-truth grid, so evaluation is voxel-aligned.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{LabelVolume, LABEL_CODE_MAX};

const HEADER_SIZE: usize = 348;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;

/// How to treat voxel codes outside the label alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    /// Reject out-of-alphabet codes (default). When false, unknown codes map
    /// to background and are counted in [`LoadStats`].
    pub strict_labels: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { strict_labels: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Voxels remapped to background under permissive label handling.
    pub remapped_out_of_alphabet: u64,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct RawHeader<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl<'a> RawHeader<'a> {
    fn i16_at(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn f32_at(&self, off: usize) -> f32 {
        let b = [
            self.bytes[off],
            self.bytes[off + 1],
            self.bytes[off + 2],
            self.bytes[off + 3],
        ];
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut decoder = MultiGzDecoder::new(raw.as_slice());
        let mut out = Vec::new();
        decoder
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: gzip decode failed: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn case_id_from_path(path: &Path) -> String {
    let mut name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".nii.gz", ".nii", ".hdr.gz", ".hdr", ".gz"] {
        if let Some(stripped) = name.strip_suffix(ext) {
            name = stripped.to_string();
            break;
        }
    }
    name
}

fn sibling_image_path(path: &Path) -> Result<PathBuf> {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(".hdr.gz")
        .or_else(|| name.strip_suffix(".hdr"))
        .ok_or_else(|| {
            Error::Format(format!(
                "{}: header/image pairs must use the .hdr extension",
                path.display()
            ))
        })?;
    for ext in [".img", ".img.gz"] {
        let candidate = path.with_file_name(format!("{stem}{ext}"));
        if candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(Error::Format(format!(
        "{}: no companion .img/.img.gz next to the header",
        path.display()
    )))
}

/// Loads a label volume in strict mode.
pub fn read_label_volume<F: Scalar>(path: &Path) -> Result<LabelVolume<F>> {
    read_label_volume_with(path, &LoadOptions::default()).map(|(vol, _)| vol)
}

/// Loads a label volume with explicit out-of-alphabet handling.
pub fn read_label_volume_with<F: Scalar>(
    path: &Path,
    options: &LoadOptions,
) -> Result<(LabelVolume<F>, LoadStats)> {
    let data = read_maybe_gz(path)?;
    if data.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "{}: file shorter than a NIfTI-1 header ({} bytes)",
            path.display(),
            data.len()
        )));
    }
    let endian = if u32::from_le_bytes([data[0], data[1], data[2], data[3]]) == HEADER_SIZE as u32 {
        Endian::Little
    } else if u32::from_be_bytes([data[0], data[1], data[2], data[3]]) == HEADER_SIZE as u32 {
        Endian::Big
    } else {
        return Err(Error::Format(format!(
            "{}: sizeof_hdr is not 348 in either byte order",
            path.display()
        )));
    };
    let header = RawHeader { bytes: &data[..HEADER_SIZE], endian };

    let magic: [u8; 4] = data[344..348].try_into().unwrap();
    let single_file = match &magic {
        m if m == MAGIC_SINGLE => true,
        m if m == MAGIC_PAIR => false,
        _ => {
            return Err(Error::Format(format!(
                "{}: bad magic {:?}, expected \"n+1\\0\" or \"ni1\\0\"",
                path.display(),
                magic
            )))
        }
    };

    let ndim = header.i16_at(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("{}: dim[0] = {ndim} out of range 1..=7", path.display())));
    }
    let dim_at = |axis: usize| -> i16 {
        if axis as i16 <= ndim {
            header.i16_at(40 + 2 * axis)
        } else {
            1
        }
    };
    for axis in 1..=(ndim as usize) {
        let extent = dim_at(axis);
        if extent < 1 {
            return Err(Error::Format(format!(
                "{}: dim[{axis}] = {extent} must be >= 1",
                path.display()
            )));
        }
        if axis > 3 && extent > 1 {
            return Err(Error::Data(format!(
                "{}: {axis}-th dimension has extent {extent}; only 3D label maps are supported",
                path.display()
            )));
        }
    }
    let dims = (dim_at(1) as usize, dim_at(2) as usize, dim_at(3) as usize);

    let spacing_axis = |axis: usize| -> Result<F> {
        let pd = header.f32_at(76 + 4 * axis);
        if pd > 0.0 {
            Ok(F::of_f64(pd as f64))
        } else if pd == 0.0 && dim_at(axis) == 1 {
            Ok(F::one())
        } else {
            Err(Error::Format(format!(
                "{}: pixdim[{axis}] = {pd} must be positive",
                path.display()
            )))
        }
    };
    let spacing = (spacing_axis(1)?, spacing_axis(2)?, spacing_axis(3)?);

    let datatype = header.i16_at(70);
    let bitpix = header.i16_at(72);
    let expected_bitpix = match datatype {
        DT_UINT8 | DT_INT8 => 8,
        DT_INT16 | DT_UINT16 => 16,
        DT_INT32 | DT_FLOAT32 => 32,
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported datatype code {other} for label maps",
                path.display()
            )))
        }
    };
    if bitpix != expected_bitpix {
        return Err(Error::Format(format!(
            "{}: bitpix {bitpix} inconsistent with datatype {datatype}",
            path.display()
        )));
    }

    let vox_offset = header.f32_at(108);
    let scl_slope = header.f32_at(112);
    let scl_inter = header.f32_at(116);

    let n_voxels = dims.0 * dims.1 * dims.2;
    let byte_len = n_voxels * (expected_bitpix as usize / 8);

    let payload_owner;
    let (payload, offset): (&[u8], usize) = if single_file {
        let off = vox_offset as usize;
        if vox_offset < HEADER_SIZE as f32 {
            return Err(Error::Format(format!(
                "{}: vox_offset {vox_offset} overlaps the header",
                path.display()
            )));
        }
        (&data, off)
    } else {
        let img = sibling_image_path(path)?;
        payload_owner = read_maybe_gz(&img)?;
        (&payload_owner, vox_offset.max(0.0) as usize)
    };
    if payload.len() < offset + byte_len {
        return Err(Error::Format(format!(
            "{}: voxel payload truncated ({} bytes present, {} required)",
            path.display(),
            payload.len(),
            offset + byte_len
        )));
    }
    let body = &payload[offset..offset + byte_len];

    let rescale = scl_slope != 0.0 && (scl_slope != 1.0 || scl_inter != 0.0);
    let mut voxels = Vec::with_capacity(n_voxels);
    let mut stats = LoadStats::default();
    for i in 0..n_voxels {
        let raw: f64 = match datatype {
            DT_UINT8 => body[i] as f64,
            DT_INT8 => body[i] as i8 as f64,
            DT_INT16 => {
                let b = [body[2 * i], body[2 * i + 1]];
                (match endian {
                    Endian::Little => i16::from_le_bytes(b),
                    Endian::Big => i16::from_be_bytes(b),
                }) as f64
            }
            DT_UINT16 => {
                let b = [body[2 * i], body[2 * i + 1]];
                (match endian {
                    Endian::Little => u16::from_le_bytes(b),
                    Endian::Big => u16::from_be_bytes(b),
                }) as f64
            }
            DT_INT32 => {
                let b = [body[4 * i], body[4 * i + 1], body[4 * i + 2], body[4 * i + 3]];
                (match endian {
                    Endian::Little => i32::from_le_bytes(b),
                    Endian::Big => i32::from_be_bytes(b),
                }) as f64
            }
            DT_FLOAT32 => {
                let b = [body[4 * i], body[4 * i + 1], body[4 * i + 2], body[4 * i + 3]];
                (match endian {
                    Endian::Little => f32::from_le_bytes(b),
                    Endian::Big => f32::from_be_bytes(b),
                }) as f64
            }
            _ => unreachable!(),
        };
        let value = if rescale { raw * scl_slope as f64 + scl_inter as f64 } else { raw };
        let rounded = value.round();
        if (value - rounded).abs() > 1e-6 {
            return Err(Error::Data(format!(
                "{}: voxel {i} has non-integral value {value} after scaling",
                path.display()
            )));
        }
        let code = rounded as i64;
        if (0..=LABEL_CODE_MAX as i64).contains(&code) {
            voxels.push(code as u8);
        } else if options.strict_labels {
            return Err(Error::Alphabet(format!(
                "{}: voxel {i} has code {code} outside alphabet 0..={LABEL_CODE_MAX}",
                path.display()
            )));
        } else {
            stats.remapped_out_of_alphabet += 1;
            voxels.push(0);
        }
    }

    let vol = LabelVolume::new(dims, spacing, voxels, &case_id_from_path(path))?;
    Ok((vol, stats))
}

/// Writes a label volume as single-file NIfTI-1 (unsigned 8-bit,
/// little-endian); gzip-compresses when the path ends in `.gz`.
pub fn write_label_volume<F: Scalar>(path: &Path, vol: &LabelVolume<F>) -> Result<()> {
    let mut header = [0u8; HEADER_SIZE];
    let put_i32 = |h: &mut [u8], off: usize, v: i32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    let (nx, ny, nz) = vol.dims();
    if nx > i16::MAX as usize || ny > i16::MAX as usize || nz > i16::MAX as usize {
        return Err(Error::Data(format!(
            "volume {:?} too large for NIfTI-1 (extent > {})",
            vol.case_id(),
            i16::MAX
        )));
    }
    put_i32(&mut header, 0, HEADER_SIZE as i32);
    put_i16(&mut header, 40, 3);
    put_i16(&mut header, 42, nx as i16);
    put_i16(&mut header, 44, ny as i16);
    put_i16(&mut header, 46, nz as i16);
    for axis in 4..8 {
        put_i16(&mut header, 40 + 2 * axis, 1);
    }
    put_i16(&mut header, 70, DT_UINT8);
    put_i16(&mut header, 72, 8);
    let (sx, sy, sz) = vol.spacing();
    put_f32(&mut header, 76, 1.0);
    put_f32(&mut header, 80, sx.to_f64_lossy() as f32);
    put_f32(&mut header, 84, sy.to_f64_lossy() as f32);
    put_f32(&mut header, 88, sz.to_f64_lossy() as f32);
    put_f32(&mut header, 108, (HEADER_SIZE + 4) as f32); // header + empty extension flag
    put_f32(&mut header, 112, 1.0);
    put_f32(&mut header, 116, 0.0);
    header[344..348].copy_from_slice(MAGIC_SINGLE);

    let mut bytes = Vec::with_capacity(HEADER_SIZE + 4 + vol.voxels().len());
    bytes.extend_from_slice(&header);
    bytes.extend_from_slice(&[0u8; 4]);
    bytes.extend_from_slice(vol.voxels());

    let gzip = path
        .extension()
        .map(|e| e.to_string_lossy().eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    if gzip {
        let file = File::create(path)?;
        let mut encoder = GzEncoder::new(file, Compression::fast());
        std::io::Write::write_all(&mut encoder, &bytes)?;
        encoder.finish()?;
    } else {
        std::fs::write(path, &bytes)?;
    }
    Ok(())
}
