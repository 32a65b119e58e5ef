//! `SGAF1` field files.
//!
//! ```text
//! SGAF1\n
//! <d> <n_1> … <n_d> dtype=f64 kind=<density|potential>\n
//! <8·Π n_j bytes of little-endian f64, last axis fastest>
//! ```

use std::path::Path;

use sga_core::{DensityField, GridSpec, PotentialField};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8] = b"SGAF1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Density,
    Potential,
}

impl FieldKind {
    fn as_str(self) -> &'static str {
        match self {
            FieldKind::Density => "density",
            FieldKind::Potential => "potential",
        }
    }
}

/// Raw contents of a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let shape: Vec<String> = self.grid.shape().iter().map(|n| n.to_string()).collect();
        let header = format!("{} {} dtype=f64 kind={}\n", self.grid.dim(), shape.join(" "), self.kind.as_str());
        let mut out = Vec::with_capacity(MAGIC.len() + header.len() + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(header.as_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses `bytes`; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> CliResult<Self> {
        let bad = |reason: &str| CliError::BadHeader { path: path.to_path_buf(), reason: reason.to_string() };
        let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| CliError::BadMagic { path: path.to_path_buf() })?;
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header = std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not ASCII"))?;
        let payload = &rest[nl + 1..];

        let tokens: Vec<&str> = header.split_ascii_whitespace().collect();
        let d: usize = tokens.first().and_then(|t| t.parse().ok()).ok_or_else(|| bad("missing dimension"))?;
        if tokens.len() != d + 3 {
            return Err(bad("expected `d n_1 … n_d dtype=f64 kind=…`"));
        }
        let shape = tokens[1..=d]
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| bad("bad axis length")))
            .collect::<CliResult<Vec<_>>>()?;
        if tokens[d + 1] != "dtype=f64" {
            return Err(bad("only dtype=f64 is supported"));
        }
        let kind = match tokens[d + 2] {
            "kind=density" => FieldKind::Density,
            "kind=potential" => FieldKind::Potential,
            _ => return Err(bad("kind must be density or potential")),
        };
        let grid = GridSpec::new(&shape).map_err(|e| bad(&e.to_string()))?;
        if payload.len() != 8 * grid.len() {
            return Err(bad(&format!("payload has {} bytes, expected {}", payload.len(), 8 * grid.len())));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self { grid, kind, values })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::read(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::write(path, e))
    }

    pub fn into_density(self, path: &Path) -> CliResult<DensityField> {
        DensityField::new(self.grid, self.values).map_err(|source| CliError::BadInput { path: path.to_path_buf(), source })
    }
}

impl From<&DensityField> for FieldFile {
    fn from(d: &DensityField) -> Self {
        Self { grid: *d.grid(), kind: FieldKind::Density, values: d.values().to_vec() }
    }
}

impl From<&PotentialField> for FieldFile {
    fn from(p: &PotentialField) -> Self {
        Self { grid: *p.grid(), kind: FieldKind::Potential, values: p.values().to_vec() }
    }
}

pub fn save_density(d: &DensityField, path: &Path) -> CliResult<()> {
    FieldFile::from(d).write(path)
}

pub fn save_potential(p: &PotentialField, path: &Path) -> CliResult<()> {
    FieldFile::from(p).write(path)
}
