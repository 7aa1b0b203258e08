//! GRD1 raster files.
//!
//! Layout, all little-endian: the magic `GRD1`, `u32` rows, `u32` cols, four
//! `f64` bbox values (lon_min, lat_min, lon_max, lat_max), then `rows * cols`
//! `f32` values in row-major order. Vector fields are stored as two files with
//! `.u.grd` and `.v.grd` suffixes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{BBox, GridError, GridSpec, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"GRD1";
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 * 8;

#[derive(Debug, thiserror::Error)]
pub enum Grd1Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Grid { path: PathBuf, source: GridError },
}

/// Decoded GRD1 contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Grd1 {
    pub rows: usize,
    pub cols: usize,
    pub bbox: BBox,
    pub data: Vec<f32>,
}

pub fn encode(rows: usize, cols: usize, bbox: &BBox, data: &[f32]) -> Vec<u8> {
    assert_eq!(data.len(), rows * cols);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in bbox.as_array() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Grd1, GridError> {
    if bytes.len() < HEADER_LEN {
        return Err(GridError::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(GridError::Format("missing GRD1 magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (rows, cols) = (u32_at(4), u32_at(8));
    let bbox = BBox::new(f64_at(12), f64_at(20), f64_at(28), f64_at(36));
    let want = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| GridError::Format("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != want {
        return Err(GridError::Format(format!(
            "{rows}x{cols} grid needs {want} data bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Grd1 {
        rows,
        cols,
        bbox,
        data,
    })
}

impl Grd1 {
    /// Converts to a field, checking the header against `spec`.
    pub fn into_field(self, spec: &GridSpec) -> Result<ScalarField, GridError> {
        if self.rows != spec.rows || self.cols != spec.cols || self.bbox != spec.bbox {
            return Err(GridError::SpecMismatch(format!(
                "file is {}x{} {:?}, scenario grid is {}x{} {:?}",
                self.rows,
                self.cols,
                self.bbox.as_array(),
                spec.rows,
                spec.cols,
                spec.bbox.as_array()
            )));
        }
        ScalarField::new(*spec, self.data.into_iter().map(f64::from).collect())
    }
}

pub fn field_bytes(field: &ScalarField) -> Vec<u8> {
    let s = field.spec();
    encode(s.rows, s.cols, &s.bbox, &field.to_f32())
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<(), Grd1Error> {
    fs::write(path, field_bytes(field)).map_err(|source| Grd1Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_field(path: &Path, spec: &GridSpec) -> Result<ScalarField, Grd1Error> {
    let bytes = fs::read(path).map_err(|source| Grd1Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
        .and_then(|g| g.into_field(spec))
        .map_err(|source| Grd1Error::Grid {
            path: path.to_path_buf(),
            source,
        })
}

/// `<base>.u.grd` and `<base>.v.grd`.
pub fn vector_paths(base: &Path) -> (PathBuf, PathBuf) {
    let s = base.as_os_str().to_string_lossy();
    (PathBuf::from(format!("{s}.u.grd")), PathBuf::from(format!("{s}.v.grd")))
}

pub fn save_vector(base: &Path, field: &VectorField) -> Result<(), Grd1Error> {
    let (pu, pv) = vector_paths(base);
    save_field(&pu, &field.u)?;
    save_field(&pv, &field.v)
}

pub fn load_vector(base: &Path, spec: &GridSpec) -> Result<VectorField, Grd1Error> {
    let (pu, pv) = vector_paths(base);
    let u = load_field(&pu, spec)?;
    let v = load_field(&pv, spec)?;
    VectorField::new(u, v).map_err(|source| Grd1Error::Grid { path: pu, source })
}
