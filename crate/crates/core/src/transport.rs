//! Transport maps `T_h = id − ∇h` realised on the grid, pushforwards and
//! the Kantorovich functional.
//!
//! For a potential `f`, the map `T_{f^c}` sends `x` to the minimiser
//! `y*(x)` of the c-transform, so in the default `Argmin` mode the map is
//! read directly off the transform and every cell's mass lands on a grid
//! node. `Gradient` mode differentiates `f^c` with finite differences and
//! splats mass multilinearly instead.

use crate::ctransform::{c_transform_fast, CTransformResult};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, integrate_values, normalize_density, DensityField, GridSpec, PotentialField, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapMode {
    #[default]
    Argmin,
    Gradient,
}

impl std::str::FromStr for MapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmin" => Ok(Self::Argmin),
            "gradient" => Ok(Self::Gradient),
            other => Err(Error::InvalidParams(format!("unknown map mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Targets {
    Cells(Vec<usize>),
    Points(Vec<[f64; MAX_DIM]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    grid: GridSpec,
    targets: Targets,
}

impl TransportMap {
    pub fn identity(grid: GridSpec) -> Self {
        Self { grid, targets: Targets::Cells((0..grid.len()).collect()) }
    }

    /// Map sending cell `k` to cell `cells[k]`.
    pub fn from_cells(grid: GridSpec, cells: Vec<usize>) -> Result<Self> {
        grid.check_len(cells.len())?;
        if let Some(&bad) = cells.iter().find(|&&c| c >= grid.len()) {
            return Err(Error::IndexOutOfRange { index: bad, limit: grid.len() });
        }
        Ok(Self { grid, targets: Targets::Cells(cells) })
    }

    /// Map sending cell `k` to the point `points[k]`, clamped to the unit box.
    pub fn from_points(grid: GridSpec, points: Vec<[f64; MAX_DIM]>) -> Result<Self> {
        grid.check_len(points.len())?;
        let d = grid.dim();
        let mut points = points;
        for p in &mut points {
            for (axis, c) in p.iter_mut().enumerate() {
                if axis < d {
                    if !c.is_finite() {
                        return Err(Error::InvalidParams("non-finite map target".into()));
                    }
                    *c = c.clamp(0.0, 1.0);
                } else {
                    *c = 0.0;
                }
            }
        }
        Ok(Self { grid, targets: Targets::Points(points) })
    }

    /// `T_{f^c}` read off a c-transform's minimisers.
    pub fn from_ctransform(ct: &CTransformResult) -> Self {
        Self { grid: *ct.grid(), targets: Targets::Cells(ct.argmin.clone()) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mode(&self) -> MapMode {
        match self.targets {
            Targets::Cells(_) => MapMode::Argmin,
            Targets::Points(_) => MapMode::Gradient,
        }
    }

    /// Target cell indices in argmin mode.
    pub fn target_cells(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Cells(c) => Some(c),
            Targets::Points(_) => None,
        }
    }

    /// Target point of cell `k`.
    pub fn target_point(&self, k: usize) -> [f64; MAX_DIM] {
        match &self.targets {
            Targets::Cells(c) => self.grid.point(c[k]),
            Targets::Points(p) => p[k],
        }
    }
}

/// Builds `T_{f^c}` in the requested mode.
pub fn transport_map_from_potential(f: &PotentialField, mode: MapMode) -> Result<TransportMap> {
    let ct = c_transform_fast(f)?;
    match mode {
        MapMode::Argmin => Ok(TransportMap::from_ctransform(&ct)),
        MapMode::Gradient => gradient_map(&ct.fc),
    }
}

/// `x − ∇φ(x)` with central differences (one-sided on the boundary).
pub fn gradient_map(phi: &PotentialField) -> Result<TransportMap> {
    let grid = *phi.grid();
    let d = grid.dim();
    let v = phi.values();
    let points = (0..grid.len())
        .map(|k| {
            let idx = grid.unravel(k);
            let mut p = grid.point(k);
            for axis in 0..d {
                let n = grid.shape()[axis];
                let s = grid.stride(axis);
                let h = grid.spacing(axis);
                let i = idx[axis];
                let grad = if i == 0 {
                    (v[k + s] - v[k]) / h
                } else if i == n - 1 {
                    (v[k] - v[k - s]) / h
                } else {
                    (v[k + s] - v[k - s]) / (2.0 * h)
                };
                p[axis] -= grad;
            }
            p
        })
        .collect();
    TransportMap::from_points(grid, points)
}

/// Adds `amount` at point `p`, split multilinearly over the surrounding
/// cell centres. Points within half a cell of the boundary go to the
/// boundary cells.
pub(crate) fn splat(grid: &GridSpec, p: &[f64; MAX_DIM], amount: f64, out: &mut [f64]) {
    let d = grid.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0f64; MAX_DIM];
    for axis in 0..d {
        let n = grid.shape()[axis];
        let u = p[axis] * n as f64 - 0.5;
        let i0 = (u.floor().max(0.0) as usize).min(n - 2);
        base[axis] = i0;
        frac[axis] = (u - i0 as f64).clamp(0.0, 1.0);
    }
    for corner in 0..(1usize << d) {
        let mut w = amount;
        let mut flat = 0;
        for axis in 0..d {
            let hi = (corner >> (d - 1 - axis)) & 1 == 1;
            let i = base[axis] + hi as usize;
            w *= if hi { frac[axis] } else { 1.0 - frac[axis] };
            flat = flat * grid.shape()[axis] + i;
        }
        if w != 0.0 {
            out[flat] += w;
        }
    }
}

/// Pushed-forward density values before renormalisation. Accumulation runs
/// in cell order, so the result does not depend on parallelism elsewhere.
pub fn pushforward_unnormalized(nu: &DensityField, map: &TransportMap) -> Result<Vec<f64>> {
    if nu.grid() != map.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = map.grid;
    let mut out = vec![0.0; grid.len()];
    match &map.targets {
        Targets::Cells(cells) => {
            for (&t, &v) in cells.iter().zip(nu.values()) {
                out[t] += v;
            }
        }
        Targets::Points(points) => {
            for (p, &v) in points.iter().zip(nu.values()) {
                if v != 0.0 {
                    splat(&grid, p, v, &mut out);
                }
            }
        }
    }
    Ok(out)
}

/// `T_# ν`, renormalised to unit mass. Values are left untouched when the
/// accumulated mass is already one to rounding.
pub fn pushforward(nu: &DensityField, map: &TransportMap) -> Result<DensityField> {
    let raw = pushforward_unnormalized(nu, map)?;
    let grid = *nu.grid();
    let mass = grid.cell_volume() * compensated_sum(raw.iter().copied());
    if (mass - 1.0).abs() <= 1e-14 {
        return Ok(DensityField::from_raw(grid, raw));
    }
    normalize_density(&raw, grid, 0.0)
}

/// Kantorovich functional `I(f) = ∫ f dμ + ∫ f^c dν`.
pub fn kantorovich_value(f: &PotentialField, mu: &DensityField, nu: &DensityField) -> Result<f64> {
    if f.grid() != mu.grid() || f.grid() != nu.grid() {
        return Err(Error::GridMismatch);
    }
    let ct = c_transform_fast(f)?;
    Ok(integrate_values(f.values(), mu) + integrate_values(ct.fc.values(), nu))
}

/// Displacement interpolation along a grid map: each cell's mass of `nu`
/// travels the fraction `s ∈ [0, 1]` of the way to its target and is
/// splatted multilinearly.
pub fn displacement_interpolation(nu: &DensityField, map: &TransportMap, s: f64) -> Result<DensityField> {
    if nu.grid() != map.grid() {
        return Err(Error::GridMismatch);
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParams(format!("interpolation fraction {s} outside [0,1]")));
    }
    let grid = map.grid;
    let d = grid.dim();
    let mut out = vec![0.0; grid.len()];
    for (k, &v) in nu.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let x = grid.point(k);
        let y = map.target_point(k);
        let mut p = [0.0; MAX_DIM];
        for axis in 0..d {
            p[axis] = (1.0 - s) * x[axis] + s * y[axis];
        }
        splat(&grid, &p, v, &mut out);
    }
    normalize_density(&out, grid, 0.0)
}
