//! Cell-centred grids on the unit box, the field containers that live on
//! them, and midpoint quadrature.
//!
//! Values are stored row-major with the last axis fastest. For 2D images
//! axis 0 is the row (y grows downward) and axis 1 the column.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Tolerance for the unit-mass invariant of a [`DensityField`].
pub const MASS_TOL: f64 = 1e-12;

/// Uniform cell-centred discretisation of `[0,1]^d`, `d <= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    dim: usize,
    shape: [usize; MAX_DIM],
}

impl GridSpec {
    pub fn new(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {}",
                shape.len()
            )));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("every axis needs at least 2 cells, got {n}")));
        }
        let mut s = [1; MAX_DIM];
        s[..shape.len()].copy_from_slice(shape);
        let grid = Self { dim: shape.len(), shape: s };
        if grid.len() > u32::MAX as usize {
            return Err(Error::InvalidGrid("too many cells".into()));
        }
        Ok(grid)
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(&[n, n])
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(&[n, n, n])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    /// Total number of cells.
    #[inline]
    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.shape[axis] as f64
    }

    /// Volume `h^d` of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.shape().iter().map(|&n| 1.0 / n as f64).product()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.shape().iter().map(|&n| 1.0 / n as f64).fold(0.0, f64::max)
    }

    /// Distance between adjacent cells along `axis` in flat-index units.
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..self.dim].iter().product()
    }

    /// Coordinate of the centre of cell `k` along `axis`.
    #[inline]
    pub fn center(&self, axis: usize, k: usize) -> f64 {
        (k as f64 + 0.5) * self.spacing(axis)
    }

    pub fn unravel(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(self.shape())
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Centre of a cell given by flat index.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut p = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            p[axis] = self.center(axis, idx[axis]);
        }
        p
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got });
        }
        Ok(())
    }
}

/// Neumaier-compensated sum; used by every quadrature so reductions are
/// deterministic and accurate independent of grid size.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// A scalar field on the grid with no sign or mass constraint: dual
/// potentials, their transforms and Poisson solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(index) = first_non_finite(&values) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan. Callers guarantee the invariant.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let values = (0..grid.len()).map(|k| f(&grid.point(k)[..d])).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        first_non_finite(&self.values).is_none()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match first_non_finite(&self.values) {
            Some(index) => Err(Error::NonFiniteInput { index }),
            None => Ok(()),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &PotentialField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> PotentialField {
        Self { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &PotentialField, b: f64) -> Result<PotentialField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lebesgue mean `h^d Σ φ` over the unit box.
    pub fn mean(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().copied())
    }
}

/// A probability density on the grid, stored as cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps values that already satisfy the density invariants.
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        check_nonnegative(&values)?;
        let mass = grid.cell_volume() * compensated_sum(values.iter().copied());
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParams(format!("density integrates to {mass}, expected 1")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn uniform(grid: GridSpec) -> Self {
        Self { grid, values: vec![1.0; grid.len()] }
    }

    /// All mass in one cell.
    pub fn one_hot(grid: GridSpec, cell: usize) -> Result<Self> {
        if cell >= grid.len() {
            return Err(Error::IndexOutOfRange { index: cell, limit: grid.len() });
        }
        let mut values = vec![0.0; grid.len()];
        values[cell] = 1.0 / grid.cell_volume();
        Ok(Self { grid, values })
    }

    /// Samples a nonnegative function at cell centres and normalises.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim();
        let raw: Vec<f64> = (0..grid.len()).map(|k| f(&grid.point(k)[..d])).collect();
        normalize_density(&raw, grid, 0.0)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete integral `h^d Σ values`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().copied())
    }

    /// Mass of each cell, `h^d · value`.
    pub fn cell_masses(&self) -> impl Iterator<Item = f64> + '_ {
        let vol = self.grid.cell_volume();
        self.values.iter().map(move |v| v * vol)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Signed difference `self - other` as a plain field (not a density).
    pub fn difference(&self, other: &DensityField) -> Result<Vec<f64>> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// `Σ w_i ρ_i` for densities on one grid; weights must sum to one.
    pub fn weighted_average(parts: &[(f64, &DensityField)]) -> Result<DensityField> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidParams("empty average".into()));
        };
        let grid = first.grid;
        let mut values = vec![0.0; grid.len()];
        for (w, rho) in parts {
            if rho.grid != grid {
                return Err(Error::GridMismatch);
            }
            for (acc, v) in values.iter_mut().zip(&rho.values) {
                *acc += w * v;
            }
        }
        normalize_density(&values, grid, 0.0)
    }
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeInput { index, value });
        }
    }
    Ok(())
}

/// Positive barycentric weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {a} is not positive")));
        }
        let total: f64 = compensated_sum(alpha.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(alpha))
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    /// Rescales positive weights to sum to one.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let total = raw.iter().fold(0.0, |s, a| s + a);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Self::new(raw.iter().map(|a| a / total).collect())
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Adds `floor` to every raw value and rescales to unit discrete integral.
pub fn normalize_density(raw: &[f64], grid: GridSpec, floor: f64) -> Result<DensityField> {
    grid.check_len(raw.len())?;
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::InvalidParams(format!("density floor {floor} must be >= 0")));
    }
    check_nonnegative(raw)?;
    let total = compensated_sum(raw.iter().map(|v| v + floor));
    if total <= 0.0 {
        return Err(Error::AllZeroInput);
    }
    let scale = 1.0 / (grid.cell_volume() * total);
    let values = raw.iter().map(|v| (v + floor) * scale).collect();
    Ok(DensityField { grid, values })
}

/// Midpoint quadrature `∫ φ dμ ≈ h^d Σ φ_k μ_k`.
pub fn integrate(phi: &PotentialField, mu: &DensityField) -> Result<f64> {
    if phi.grid != mu.grid {
        return Err(Error::GridMismatch);
    }
    Ok(integrate_values(&phi.values, mu))
}

pub(crate) fn integrate_values(phi: &[f64], mu: &DensityField) -> f64 {
    mu.grid.cell_volume() * compensated_sum(phi.iter().zip(&mu.values).map(|(p, m)| p * m))
}

/// Removes the Lebesgue mean so the field is a representative in `Ḣ¹`.
pub fn zero_mean(phi: &PotentialField) -> PotentialField {
    let mut out = phi.clone();
    zero_mean_in_place(&mut out.values, &phi.grid);
    out
}

pub(crate) fn zero_mean_in_place(values: &mut [f64], grid: &GridSpec) {
    let mean = grid.cell_volume() * compensated_sum(values.iter().copied());
    for v in values.iter_mut() {
        *v -= mean;
    }
}
