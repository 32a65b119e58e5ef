//! Neumann Poisson solves and `Ḣ¹` / `Ḣ⁻¹` norms on cell-centred grids.
//!
//! The second-order stencil with reflected ghost cells is diagonalised by
//! the type-II cosine transform, with per-axis eigenvalues
//! `λ_k = (2 − 2 cos(πk/n)) / h²`. Solving `−Δ_h g = ρ` is therefore a
//! forward DCT-II, a division by `Σ_j λ_{j,k_j}` (mode zero set to 0) and
//! a DCT-III back.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, DensityField, GridSpec, PotentialField};
use crate::lines::{for_each_line, Lines};

/// Admissible discrete mean of a Neumann right-hand side.
pub const MEAN_TOL: f64 = 1e-8;

/// Cosine-transform plans and Neumann eigenvalues for one grid.
pub struct SpectralPlan {
    grid: GridSpec,
    eigenvalues: Vec<Vec<f64>>,
    dct: Vec<Arc<dyn TransformType2And3<f64>>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish_non_exhaustive()
    }
}

fn plan_cache() -> &'static Mutex<HashMap<GridSpec, Arc<SpectralPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<GridSpec, Arc<SpectralPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl SpectralPlan {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = DctPlanner::new();
        let mut eigenvalues = Vec::with_capacity(grid.dim());
        let mut dct = Vec::with_capacity(grid.dim());
        for axis in 0..grid.dim() {
            let n = grid.shape()[axis];
            let h = grid.spacing(axis);
            eigenvalues.push(
                (0..n)
                    .map(|k| (2.0 - 2.0 * (PI * k as f64 / n as f64).cos()) / (h * h))
                    .collect(),
            );
            dct.push(planner.plan_dct2(n));
        }
        Self { grid, eigenvalues, dct }
    }

    /// Shared plan for `grid`, built on first use.
    pub fn for_grid(grid: &GridSpec) -> Arc<SpectralPlan> {
        let mut cache = plan_cache().lock().unwrap_or_else(|e| e.into_inner());
        cache.entry(*grid).or_insert_with(|| Arc::new(SpectralPlan::new(*grid))).clone()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Neumann eigenvalues along `axis`, indexed by mode.
    pub fn eigenvalues(&self, axis: usize) -> &[f64] {
        &self.eigenvalues[axis]
    }

    fn transform(&self, data: &mut [f64], inverse: bool) {
        let mut buf = Vec::new();
        for axis in 0..self.grid.dim() {
            let lines = Lines::new(&self.grid, axis);
            let plan = &self.dct[axis];
            let scratch_len = plan.get_scratch_len();
            let run = |line: &mut [f64], scratch: &mut Vec<f64>| {
                if inverse {
                    plan.process_dct3_with_scratch(line, scratch);
                } else {
                    plan.process_dct2_with_scratch(line, scratch);
                }
            };
            let init = || vec![0.0; scratch_len];
            if lines.contiguous() {
                for_each_line(lines.len, data, init, run);
            } else {
                buf.resize(data.len(), 0.0);
                lines.gather(data, &mut buf);
                for_each_line(lines.len, &mut buf, init, run);
                lines.scatter(&buf, data);
            }
        }
        if inverse {
            let scale: f64 = self.grid.shape().iter().map(|&n| 2.0 / n as f64).product();
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Unnormalised forward DCT-II along every axis.
    pub fn forward(&self, values: &[f64]) -> Vec<f64> {
        let mut data = values.to_vec();
        self.transform(&mut data, false);
        data
    }

    /// Inverse of [`SpectralPlan::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, true);
        data
    }

    /// Calls `f(flat_mode, Σ_j λ_{j,k_j}, parseval_weight)` for every mode.
    /// The weight is `Π_j c_j / n_j` with `c_j = 1` for `k_j = 0` and 2 otherwise.
    fn for_each_mode(&self, mut f: impl FnMut(usize, f64, f64)) {
        let g = &self.grid;
        let d = g.dim();
        for mode in 0..g.len() {
            let k = g.unravel(mode);
            let mut lambda = 0.0;
            let mut weight = 1.0;
            for axis in 0..d {
                lambda += self.eigenvalues[axis][k[axis]];
                let n = g.shape()[axis] as f64;
                weight *= if k[axis] == 0 { 1.0 / n } else { 2.0 / n };
            }
            f(mode, lambda, weight);
        }
    }

    pub(crate) fn solve_values(&self, rhs: &[f64]) -> Vec<f64> {
        let mut coeffs = self.forward(rhs);
        self.for_each_mode(|mode, lambda, _| {
            coeffs[mode] = if mode == 0 { 0.0 } else { coeffs[mode] / lambda };
        });
        self.inverse(&coeffs)
    }

    pub(crate) fn dirichlet_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let ca = self.forward(a);
        let cb = if std::ptr::eq(a, b) { ca.clone() } else { self.forward(b) };
        let mut terms = Vec::with_capacity(ca.len());
        self.for_each_mode(|mode, lambda, weight| terms.push(lambda * weight * ca[mode] * cb[mode]));
        self.grid.cell_volume() * compensated_sum(terms)
    }
}

/// Solves `−Δ_h g = ρ` with zero Neumann data; the solution has zero mean.
pub fn solve_neumann(rho: &PotentialField) -> Result<PotentialField> {
    rho.check_finite()?;
    let grid = rho.grid();
    let mean = rho.mean();
    if mean.abs() > MEAN_TOL {
        return Err(Error::NonZeroMean { mean });
    }
    let plan = SpectralPlan::for_grid(grid);
    Ok(PotentialField::from_raw(*grid, plan.solve_values(rho.values())))
}

/// Discrete Dirichlet energy norm `‖φ‖_{Ḣ¹}`, evaluated spectrally.
pub fn h1_norm(phi: &PotentialField) -> Result<f64> {
    Ok(h1_inner(phi, phi)?.max(0.0).sqrt())
}

/// `⟨φ, ψ⟩_{Ḣ¹} = h^d Σ ∇_h φ · ∇_h ψ`.
pub fn h1_inner(phi: &PotentialField, psi: &PotentialField) -> Result<f64> {
    if phi.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    phi.check_finite()?;
    psi.check_finite()?;
    let plan = SpectralPlan::for_grid(phi.grid());
    Ok(plan.dirichlet_inner(phi.values(), psi.values()))
}

/// `‖μ − ν‖_{Ḣ⁻¹}`, the `Ḣ¹` norm of the Neumann solution with data `μ − ν`.
pub fn hminus1_norm(mu: &DensityField, nu: &DensityField) -> Result<f64> {
    let diff = PotentialField::new(*mu.grid(), mu.difference(nu)?)?;
    h1_norm(&solve_neumann(&diff)?)
}
