//! Density ingestion from field files and grayscale images, and 16-bit PGM
//! export.
//!
//! Image row 0 (the top row) becomes grid index 0 along axis 0, so the
//! first coordinate grows downward; columns map to axis 1. Colour images
//! are reduced to luma (Rec. 709 weights) before normalisation.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{ImageBuffer, Luma};
use sga_core::{normalize_density, DensityField, GridSpec};

use crate::error::{CliError, CliResult};
use crate::fieldfile::{save_density, FieldFile, MAGIC};

/// Loads a density from a field file, PGM or PNG.
///
/// `shape` resamples images to the given `[rows, cols]`; for field files it
/// must match the stored shape. `floor` is added to every raw value before
/// normalisation.
pub fn load_density(path: &Path, shape: Option<&[usize]>, floor: f64) -> CliResult<DensityField> {
    let bytes = std::fs::read(path).map_err(|e| CliError::read(path, e))?;
    let bad_input = |source| CliError::BadInput { path: path.to_path_buf(), source };
    if bytes.starts_with(MAGIC) {
        let file = FieldFile::from_bytes(&bytes, path)?;
        if let Some(s) = shape {
            if s != file.grid.shape() {
                return Err(CliError::Config(format!(
                    "{}: stored shape {:?} differs from requested {:?}",
                    path.display(),
                    file.grid.shape(),
                    s
                )));
            }
        }
        return normalize_density(&file.values, file.grid, floor).map_err(bad_input);
    }
    let format = image::guess_format(&bytes).map_err(|_| CliError::BadMagic { path: path.to_path_buf() })?;
    let img = image::load_from_memory_with_format(&bytes, format).map_err(|e| CliError::read(path, e))?;
    let mut luma = img.to_luma32f();
    if let Some(s) = shape {
        if s.len() != 2 || s.iter().any(|&n| n < 2 || n > u32::MAX as usize) {
            return Err(CliError::Config(format!("image grid override must be rows,cols; got {s:?}")));
        }
        if (luma.height() as usize, luma.width() as usize) != (s[0], s[1]) {
            luma = image::imageops::resize(&luma, s[1] as u32, s[0] as u32, FilterType::Triangle);
        }
    }
    let grid = GridSpec::new(&[luma.height() as usize, luma.width() as usize])
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let raw: Vec<f64> = luma.pixels().map(|p| f64::from(p.0[0]).max(0.0)).collect();
    normalize_density(&raw, grid, floor).map_err(bad_input)
}

/// 16-bit binary PGM, scaled so the maximum maps to 65535.
pub fn write_pgm16(rows: usize, cols: usize, values: &[f64], path: &Path) -> CliResult<()> {
    debug_assert_eq!(values.len(), rows * cols);
    let max = values.iter().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    // The PNM encoder in `image` has no 16-bit gray path; P5 is simple
    // enough to emit directly (samples are big-endian).
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(2 * values.len());
    for v in values {
        let px = (v.max(0.0) * scale).round().min(65535.0) as u16;
        out.extend_from_slice(&px.to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| CliError::write(path, e))
}

/// Reads any PGM/PNG into a row-major `u16` buffer (for round-trip checks).
pub fn read_gray16(path: &Path) -> CliResult<ImageBuffer<Luma<u16>, Vec<u16>>> {
    let img = image::open(path).map_err(|e| CliError::read(path, e))?;
    Ok(img.to_luma16())
}

/// Writes a viewable form of `field` next to `stem`.
///
/// 2D: `<stem>.pgm`. 3D: `<stem>_axis{0,1,2}.pgm`, the mid-slices normal to
/// each axis, plus the full `<stem>.sgaf`. Returns the files written.
pub fn export_visual(field: &DensityField, stem: &Path) -> CliResult<Vec<PathBuf>> {
    let g = field.grid();
    let v = field.values();
    match g.dim() {
        2 => {
            let path = stem.with_extension("pgm");
            write_pgm16(g.shape()[0], g.shape()[1], v, &path)?;
            Ok(vec![path])
        }
        3 => {
            let mut written = Vec::new();
            for axis in 0..3 {
                let (a, b) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let mid = g.shape()[axis] / 2;
                let (ra, rb) = (g.shape()[a], g.shape()[b]);
                let mut slice = Vec::with_capacity(ra * rb);
                for i in 0..ra {
                    for j in 0..rb {
                        let mut idx = [0usize; 3];
                        idx[axis] = mid;
                        idx[a] = i;
                        idx[b] = j;
                        slice.push(v[g.ravel(&idx)]);
                    }
                }
                let name = format!("{}_axis{axis}.pgm", stem.file_name().map_or("field".into(), |s| s.to_string_lossy()));
                let path = stem.with_file_name(name);
                write_pgm16(ra, rb, &slice, &path)?;
                written.push(path);
            }
            let path = stem.with_extension("sgaf");
            save_density(field, &path)?;
            written.push(path);
            Ok(written)
        }
        d => Err(CliError::UnsupportedDim(d)),
    }
}
