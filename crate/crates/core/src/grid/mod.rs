//! Dense row-major rasters over a shared [`GridSpec`].
//!
//! Row 0 is the northern edge of the bounding box and column 0 the western
//! edge. Longitude and latitude map affinely onto columns and rows; all
//! distances use the uniform `pixel_size_km`.

pub mod grd1;
mod ops;
pub mod pgm;
mod raster;
mod wkt;

use serde::{Deserialize, Serialize};

pub use ops::{abs_diff, box_convolve, gradient_magnitude, normalize01};
pub use raster::{buffer_mask, rasterize_polygon};
pub use wkt::{parse_point, wkt_parse, Polygon};

/// `(row, col)` index of a grid cell.
pub type Cell = (usize, usize);

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("field has {got} values, grid needs {want}")]
    WrongLength { got: usize, want: usize },
    #[error("non-finite value at cell {0:?}")]
    NonFinite(Cell),
    #[error("WKT parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("bad GRD1 data: {0}")]
    Format(String),
}

/// Chebyshev (king-move) distance between two cells.
pub fn chebyshev(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Euclidean distance between two cells, in cells.
pub fn cell_distance(a: Cell, b: Cell) -> f64 {
    let dr = a.0 as f64 - b.0 as f64;
    let dc = a.1 as f64 - b.1 as f64;
    dr.hypot(dc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
}

impl BBox {
    pub fn new(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Self {
        BBox {
            lon_min,
            lat_min,
            lon_max,
            lat_max,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.lon_min, self.lat_min, self.lon_max, self.lat_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub bbox: BBox,
    pub pixel_size_km: f64,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, bbox: BBox, pixel_size_km: f64) -> Result<Self, GridError> {
        let spec = GridSpec {
            rows,
            cols,
            bbox,
            pixel_size_km,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), GridError> {
        if self.rows < 2 || self.cols < 2 {
            return Err(GridError::InvalidSpec(format!(
                "rows and cols must be >= 2, got {}x{}",
                self.rows, self.cols
            )));
        }
        let b = &self.bbox;
        if !(b.lon_min < b.lon_max && b.lat_min < b.lat_max) {
            return Err(GridError::InvalidSpec(format!("degenerate bbox {:?}", b.as_array())));
        }
        if !(self.pixel_size_km > 0.0 && self.pixel_size_km.is_finite()) {
            return Err(GridError::InvalidSpec(format!(
                "pixel_size_km must be > 0, got {}",
                self.pixel_size_km
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.cols + c
    }

    pub fn cell(&self, index: usize) -> Cell {
        (index / self.cols, index % self.cols)
    }

    pub fn contains(&self, (r, c): Cell) -> bool {
        r < self.rows && c < self.cols
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let cols = self.cols;
        (0..self.len()).map(move |i| (i / cols, i % cols))
    }

    pub fn lon_step(&self) -> f64 {
        (self.bbox.lon_max - self.bbox.lon_min) / self.cols as f64
    }

    pub fn lat_step(&self) -> f64 {
        (self.bbox.lat_max - self.bbox.lat_min) / self.rows as f64
    }

    /// `(lon, lat)` of a cell center.
    pub fn cell_center(&self, (r, c): Cell) -> (f64, f64) {
        (
            self.bbox.lon_min + (c as f64 + 0.5) * self.lon_step(),
            self.bbox.lat_max - (r as f64 + 0.5) * self.lat_step(),
        )
    }

    /// The cell containing `(lon, lat)`, if inside the bbox.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Option<Cell> {
        let x = (lon - self.bbox.lon_min) / self.lon_step();
        let y = (self.bbox.lat_max - lat) / self.lat_step();
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let (r, c) = (y.floor() as usize, x.floor() as usize);
        // the max edges belong to the last row/column
        let cell = (r.min(self.rows - 1), c.min(self.cols - 1));
        if y > self.rows as f64 || x > self.cols as f64 {
            None
        } else {
            Some(cell)
        }
    }

    /// The cell's outline as lon/lat corners, offset by `pad` cells on each side.
    pub fn cell_box(&self, (r, c): Cell, pad: usize) -> Polygon {
        let (dx, dy) = (self.lon_step(), self.lat_step());
        let west = self.bbox.lon_min + (c as f64 - pad as f64) * dx;
        let east = self.bbox.lon_min + (c as f64 + 1.0 + pad as f64) * dx;
        let north = self.bbox.lat_max - (r as f64 - pad as f64) * dy;
        let south = self.bbox.lat_max - (r as f64 + 1.0 + pad as f64) * dy;
        Polygon::new(vec![
            (west, south),
            (east, south),
            (east, north),
            (west, north),
        ])
        .expect("box has four vertices")
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::SpecMismatch(format!(
                "{}x{} {:?} vs {}x{} {:?}",
                self.rows,
                self.cols,
                self.bbox.as_array(),
                other.rows,
                other.cols,
                other.bbox.as_array()
            )))
        }
    }
}

/// A real-valued raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != spec.len() {
            return Err(GridError::WrongLength {
                got: data.len(),
                want: spec.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(GridError::NonFinite(spec.cell(i)));
        }
        Ok(ScalarField { spec, data })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::filled(spec, 0.0)
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        ScalarField {
            spec,
            data: vec![value; spec.len()],
        }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Cell) -> f64) -> Result<Self, GridError> {
        let data = spec.cells().map(&mut f).collect();
        Self::new(spec, data)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.data[self.spec.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, value: f64) {
        let i = self.spec.index(cell);
        self.data[i] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Elementwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField, GridError> {
        self.spec.ensure_same(&other.spec)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::new(self.spec, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Values rounded to `f32`, the storage precision of GRD1 and hashes.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&x| x as f32).collect()
    }
}

/// Eastward (`u`) and northward (`v`) components, in km/h.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl VectorField {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self, GridError> {
        u.spec.ensure_same(&v.spec)?;
        Ok(VectorField { u, v })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        VectorField {
            u: ScalarField::zeros(spec),
            v: ScalarField::zeros(spec),
        }
    }

    pub fn uniform(spec: GridSpec, u: f64, v: f64) -> Self {
        VectorField {
            u: ScalarField::filled(spec, u),
            v: ScalarField::filled(spec, v),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.u.spec()
    }

    pub fn at(&self, cell: Cell) -> (f64, f64) {
        (self.u.get(cell), self.v.get(cell))
    }
}

/// A raster of weights in `[0, 1]`; hard masks hold only 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    spec: GridSpec,
    data: Vec<f64>,
}

impl Mask {
    pub fn new(spec: GridSpec, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != spec.len() {
            return Err(GridError::WrongLength {
                got: data.len(),
                want: spec.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(GridError::NonFinite(spec.cell(i)));
        }
        Ok(Mask { spec, data })
    }

    pub fn ones(spec: GridSpec) -> Self {
        Mask {
            spec,
            data: vec![1.0; spec.len()],
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Mask {
            spec,
            data: vec![0.0; spec.len()],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.data[self.spec.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value));
        let i = self.spec.index(cell);
        self.data[i] = value;
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0 || x == 1.0)
    }

    /// Number of cells with a nonzero weight.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    /// `1 - self`, for turning a region indicator into a keep-mask.
    pub fn complement(&self) -> Mask {
        Mask {
            spec: self.spec,
            data: self.data.iter().map(|&x| 1.0 - x).collect(),
        }
    }

    pub fn as_field(&self) -> ScalarField {
        ScalarField {
            spec: self.spec,
            data: self.data.clone(),
        }
    }
}
