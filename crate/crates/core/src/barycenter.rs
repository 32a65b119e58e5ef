//! Wasserstein barycenters through the constraint-free concave dual
//!
//! `D(f_1,…,f_{m−1}) = Σ_{i<m} α_i ∫ f_i^c dμ_i + α_m ∫ f_mix^c dμ_m`,
//! `f_mix = −Σ_{i<m} (α_i/α_m) f_i`,
//!
//! maximised by Sobolev gradient ascent over unrestricted potentials. The
//! partial gradient in `f_i` is
//! `(−Δ)⁻¹(−α_i (T_{f_i^c #} μ_i − T_{f_mix^c #} μ_m))`, and at the optimum
//! every pushforward coincides with the barycenter. No c-concavity
//! projection is applied anywhere on this path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convergence::{ConvergenceLog, IterRecord};
use crate::ctransform::{c_transform_fast, CTransformResult};
use crate::error::{Error, Result};
use crate::grid::{integrate_values, zero_mean_in_place, DensityField, GridSpec, PotentialField, Weights};
use crate::ot::{map_for, w2_distance, StepSchedule, W2Config};
use crate::poisson::{h1_norm, SpectralPlan};
use crate::transport::{pushforward, MapMode};

/// Marginals on a shared grid with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    marginals: Vec<DensityField>,
    weights: Weights,
}

impl BarycenterProblem {
    pub fn new(marginals: Vec<DensityField>, weights: Weights) -> Result<Self> {
        if marginals.len() < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 marginals, got {}", marginals.len())));
        }
        if marginals.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} marginals",
                weights.len(),
                marginals.len()
            )));
        }
        let grid = *marginals[0].grid();
        if marginals.iter().any(|m| *m.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { marginals, weights })
    }

    /// Drops marginals with zero weight and normalises the rest.
    pub fn from_raw_weights(marginals: Vec<DensityField>, raw: &[f64]) -> Result<Self> {
        if marginals.len() != raw.len() {
            return Err(Error::InvalidWeights(format!("{} weights for {} marginals", raw.len(), marginals.len())));
        }
        if let Some(w) = raw.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative")));
        }
        let (kept, alpha): (Vec<DensityField>, Vec<f64>) =
            marginals.into_iter().zip(raw.iter().copied()).filter(|(_, w)| *w > 0.0).unzip();
        Self::new(kept, Weights::normalized(&alpha)?)
    }

    pub fn grid(&self) -> &GridSpec {
        self.marginals[0].grid()
    }

    /// Number of marginals `m`.
    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn marginals(&self) -> &[DensityField] {
        &self.marginals
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    fn alpha(&self, i: usize) -> f64 {
        self.weights.as_slice()[i]
    }
}

/// Free potentials `f_1..f_{m−1}`; `f_mix` is always derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    potentials: Vec<PotentialField>,
}

impl DualState {
    pub fn zeros(prob: &BarycenterProblem) -> Self {
        Self { potentials: vec![PotentialField::zeros(*prob.grid()); prob.len() - 1] }
    }

    pub fn new(potentials: Vec<PotentialField>) -> Result<Self> {
        if potentials.is_empty() {
            return Err(Error::InvalidParams("dual state needs at least one potential".into()));
        }
        let grid = *potentials[0].grid();
        if potentials.iter().any(|p| *p.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { potentials })
    }

    pub fn potentials(&self) -> &[PotentialField] {
        &self.potentials
    }

    pub fn into_potentials(self) -> Vec<PotentialField> {
        self.potentials
    }

    /// `f_mix = −Σ_{i<m} (α_i/α_m) f_i`.
    pub fn mix(&self, weights: &Weights) -> Result<PotentialField> {
        let alpha = weights.as_slice();
        if alpha.len() != self.potentials.len() + 1 {
            return Err(Error::InvalidWeights(format!(
                "{} weights for a state with {} free potentials",
                alpha.len(),
                self.potentials.len()
            )));
        }
        let am = alpha[alpha.len() - 1];
        let grid = *self.potentials[0].grid();
        let mut out = vec![0.0; grid.len()];
        for (f, a) in self.potentials.iter().zip(alpha) {
            let c = a / am;
            for (o, v) in out.iter_mut().zip(f.values()) {
                *o -= c * v;
            }
        }
        PotentialField::new(grid, out)
    }

    /// `a·self + b·other`, coordinatewise.
    pub fn combine(&self, a: f64, other: &DualState, b: f64) -> Result<DualState> {
        if self.potentials.len() != other.potentials.len() {
            return Err(Error::InvalidParams("dual states of different size".into()));
        }
        let potentials = self
            .potentials
            .iter()
            .zip(&other.potentials)
            .map(|(x, y)| x.combine(a, y, b))
            .collect::<Result<_>>()?;
        Ok(DualState { potentials })
    }

    /// Adds `eps·h` to coordinate `i`.
    pub fn perturbed(&self, i: usize, eps: f64, h: &PotentialField) -> Result<DualState> {
        let mut out = self.clone();
        let n = out.potentials.len();
        out.potentials
            .get_mut(i)
            .ok_or(Error::IndexOutOfRange { index: i, limit: n })?
            .axpy(eps, h)?;
        Ok(out)
    }

    fn check(&self, prob: &BarycenterProblem) -> Result<()> {
        if self.potentials.len() + 1 != prob.len() {
            return Err(Error::InvalidParams(format!(
                "state has {} potentials, problem needs {}",
                self.potentials.len(),
                prob.len() - 1
            )));
        }
        if *self.potentials[0].grid() != *prob.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Cached c-transform and pushforward for one potential (index `m−1` is `f_mix`).
#[derive(Debug, Clone)]
struct Slot {
    ct: CTransformResult,
    push: DensityField,
}

/// Lazily evaluated transforms of a dual state, invalidated coordinatewise.
struct Workspace<'p> {
    prob: &'p BarycenterProblem,
    mode: MapMode,
    slots: Vec<Option<Slot>>,
}

impl<'p> Workspace<'p> {
    fn new(prob: &'p BarycenterProblem, mode: MapMode) -> Self {
        Self { prob, mode, slots: vec![None; prob.len()] }
    }

    fn invalidate(&mut self, i: usize) {
        self.slots[i] = None;
        let last = self.slots.len() - 1;
        self.slots[last] = None;
    }

    fn ensure(&mut self, state: &DualState, j: usize) -> Result<&Slot> {
        if self.slots[j].is_none() {
            let m = self.prob.len();
            let ct = if j + 1 == m {
                c_transform_fast(&state.mix(self.prob.weights())?)?
            } else {
                c_transform_fast(&state.potentials[j])?
            };
            let push = pushforward(&self.prob.marginals[j], &map_for(&ct, self.mode)?)?;
            self.slots[j] = Some(Slot { ct, push });
        }
        Ok(self.slots[j].as_ref().expect("slot filled above"))
    }

    fn ensure_all(&mut self, state: &DualState) -> Result<()> {
        for j in 0..self.prob.len() {
            self.ensure(state, j)?;
        }
        Ok(())
    }

    fn slot(&self, j: usize) -> &Slot {
        self.slots[j].as_ref().expect("slot evaluated")
    }

    fn value(&mut self, state: &DualState) -> Result<f64> {
        self.ensure_all(state)?;
        let alpha = self.prob.weights.as_slice();
        Ok((0..self.prob.len())
            .map(|j| alpha[j] * integrate_values(self.slot(j).ct.fc.values(), &self.prob.marginals[j]))
            .sum())
    }

    fn gradient(&mut self, state: &DualState, i: usize) -> Result<PotentialField> {
        let m = self.prob.len();
        self.ensure(state, i)?;
        self.ensure(state, m - 1)?;
        let a = self.prob.alpha(i);
        let pi = self.slot(i).push.values();
        let pm = self.slot(m - 1).push.values();
        let rhs: Vec<f64> = pi.iter().zip(pm).map(|(x, y)| -a * (x - y)).collect();
        let grid = *self.prob.grid();
        let mut g = SpectralPlan::for_grid(&grid).solve_values(&rhs);
        zero_mean_in_place(&mut g, &grid);
        Ok(PotentialField::from_raw(grid, g))
    }
}

/// `D(f_1,…,f_{m−1})`.
pub fn dual_value(state: &DualState, prob: &BarycenterProblem) -> Result<f64> {
    state.check(prob)?;
    Workspace::new(prob, MapMode::Argmin).value(state)
}

/// Sobolev gradient of `D` in coordinate `i` (0-based, `i < m−1`).
pub fn dual_gradient(state: &DualState, prob: &BarycenterProblem, i: usize) -> Result<PotentialField> {
    state.check(prob)?;
    if i + 1 >= prob.len() {
        return Err(Error::IndexOutOfRange { index: i, limit: prob.len() - 1 });
    }
    Workspace::new(prob, MapMode::Argmin).gradient(state, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Every coordinate steps from the sweep-start state.
    #[default]
    Parallel,
    /// Coordinates step in order, each seeing the ones already updated.
    Sequential,
    /// One uniformly sampled coordinate per update.
    Random,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Self::Parallel),
            "sequential" => Ok(Self::Sequential),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidParams(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Which pushforward represents the barycenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Source {
    /// `T_{f_i^c #} μ_i`; index `m−1` uses `f_mix`.
    Marginal(usize),
    /// `Σ α_i T_{f_i^c #} μ_i` over all `m` marginals.
    #[default]
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycenterConfig {
    pub scheme: Scheme,
    pub schedule: StepSchedule,
    /// Number of sweeps. A random-scheme sweep is `m−1` coordinate updates.
    pub iters: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub mode: MapMode,
    pub source: Source,
    /// Solver for `B(ρ̂)`; `None` skips the primal evaluation.
    pub primal: Option<W2Config>,
}

impl BarycenterConfig {
    pub fn new(scheme: Scheme, schedule: StepSchedule, iters: usize) -> Self {
        Self {
            scheme,
            schedule,
            iters,
            seed: 0,
            eval_every: 1,
            mode: MapMode::Argmin,
            source: Source::Average,
            primal: Some(W2Config::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterResult {
    pub f_best: DualState,
    pub d_best: f64,
    pub barycenter: DensityField,
    /// `B(ρ̂)` when a primal solver was configured.
    pub b_value: Option<f64>,
    /// `B(ρ̂) − D_best`.
    pub gap: Option<f64>,
    pub log: ConvergenceLog,
}

/// Stepping driver for the three ascent schemes.
pub struct BarycenterSolver<'p> {
    prob: &'p BarycenterProblem,
    state: DualState,
    ws: Workspace<'p>,
    schedule: StepSchedule,
    scheme: Scheme,
    rng: ChaCha8Rng,
    updates: usize,
}

/// Dual value and full gradient norm at the sweep-start state.
#[derive(Debug, Clone, Copy)]
pub struct SweepEval {
    pub value: f64,
    pub grad_h1: f64,
}

impl<'p> BarycenterSolver<'p> {
    pub fn new(prob: &'p BarycenterProblem, scheme: Scheme, schedule: StepSchedule, seed: u64, mode: MapMode) -> Self {
        Self {
            prob,
            state: DualState::zeros(prob),
            ws: Workspace::new(prob, mode),
            schedule,
            scheme,
            rng: ChaCha8Rng::seed_from_u64(seed),
            updates: 0,
        }
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    /// Evaluates `D` and `‖∇D‖` at the current state.
    pub fn evaluate(&mut self) -> Result<SweepEval> {
        let value = self.ws.value(&self.state)?;
        let mut sq = 0.0;
        for i in 0..self.prob.len() - 1 {
            let g = self.ws.gradient(&self.state, i)?;
            sq += h1_norm(&g)?.powi(2);
        }
        Ok(SweepEval { value, grad_h1: sq.sqrt() })
    }

    fn update(&mut self, i: usize, g: &PotentialField, eta: f64) -> Result<()> {
        self.state.potentials[i].axpy(eta, g)?;
        if !self.state.potentials[i].is_finite() {
            return Err(Error::NonFiniteInput { index: i });
        }
        self.ws.invalidate(i);
        Ok(())
    }

    /// One sweep of the configured scheme; `t` is the sweep index.
    pub fn sweep(&mut self, t: usize) -> Result<()> {
        let k = self.prob.len() - 1;
        match self.scheme {
            Scheme::Parallel => {
                let eta = self.schedule.step(t);
                let grads = (0..k).map(|i| self.ws.gradient(&self.state, i)).collect::<Result<Vec<_>>>()?;
                for (i, g) in grads.iter().enumerate() {
                    self.update(i, g, eta)?;
                }
            }
            Scheme::Sequential => {
                let eta = self.schedule.step(t);
                for i in 0..k {
                    let g = self.ws.gradient(&self.state, i)?;
                    self.update(i, &g, eta)?;
                }
            }
            Scheme::Random => {
                for _ in 0..k {
                    let i = self.rng.random_range(0..k);
                    let eta = self.schedule.step(self.updates);
                    let g = self.ws.gradient(&self.state, i)?;
                    self.update(i, &g, eta)?;
                    self.updates += 1;
                }
            }
        }
        Ok(())
    }
}

fn as_divergence(e: Error, t: usize, best: f64) -> Error {
    match e {
        Error::NonFiniteInput { .. } => Error::NonFiniteIterate { iteration: t, best_value: best },
        other => other,
    }
}

/// Runs the configured ascent scheme from `f_i ≡ 0`, keeps the best
/// evaluated state, and extracts the barycenter from it.
pub fn sga_barycenter(prob: &BarycenterProblem, cfg: &BarycenterConfig) -> Result<BarycenterResult> {
    if cfg.iters == 0 || cfg.eval_every == 0 {
        return Err(Error::InvalidParams("iters and eval-every must be at least 1".into()));
    }
    let mut solver = BarycenterSolver::new(prob, cfg.scheme, cfg.schedule, cfg.seed, cfg.mode);
    let mut log = ConvergenceLog::new();
    let mut f_best = solver.state().clone();
    for t in 0..=cfg.iters {
        if t.is_multiple_of(cfg.eval_every) || t == cfg.iters {
            let ev = solver.evaluate().map_err(|e| as_divergence(e, t, log.best_value()))?;
            if !ev.value.is_finite() {
                return Err(Error::NonFiniteIterate { iteration: t, best_value: log.best_value() });
            }
            let eta = cfg.schedule.step(t);
            if log.push(IterRecord { t, value: ev.value, grad_h1: ev.grad_h1, eta }) {
                f_best = solver.state().clone();
            }
        }
        if t == cfg.iters {
            break;
        }
        solver.sweep(t).map_err(|e| as_divergence(e, t, log.best_value()))?;
    }
    let d_best = log.best_value();
    let barycenter = extract_barycenter_with(&f_best, prob, cfg.source, cfg.mode)?;
    let (b_value, gap) = match &cfg.primal {
        Some(w2) => {
            let b = barycenter_functional(&barycenter, prob, w2)?;
            (Some(b), Some(b - d_best))
        }
        None => (None, None),
    };
    Ok(BarycenterResult { f_best, d_best, barycenter, b_value, gap, log })
}

/// Barycenter estimate `T_{f^c #} μ` from the chosen source.
pub fn extract_barycenter(state: &DualState, prob: &BarycenterProblem, source: Source) -> Result<DensityField> {
    extract_barycenter_with(state, prob, source, MapMode::Argmin)
}

pub fn extract_barycenter_with(
    state: &DualState,
    prob: &BarycenterProblem,
    source: Source,
    mode: MapMode,
) -> Result<DensityField> {
    state.check(prob)?;
    let mut ws = Workspace::new(prob, mode);
    match source {
        Source::Marginal(i) => {
            if i >= prob.len() {
                return Err(Error::IndexOutOfRange { index: i, limit: prob.len() });
            }
            Ok(ws.ensure(state, i)?.push.clone())
        }
        Source::Average => {
            ws.ensure_all(state)?;
            let alpha = prob.weights.as_slice();
            let parts: Vec<(f64, &DensityField)> = (0..prob.len()).map(|j| (alpha[j], &ws.slot(j).push)).collect();
            DensityField::weighted_average(&parts)
        }
    }
}

/// Primal objective `B(ρ) = Σ (α_i/2) W₂²(μ_i, ρ)`.
pub fn barycenter_functional(rho: &DensityField, prob: &BarycenterProblem, w2: &W2Config) -> Result<f64> {
    if rho.grid() != prob.grid() {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    for (mu, a) in prob.marginals.iter().zip(prob.weights.as_slice()) {
        let d = w2_distance(mu, rho, w2)?;
        total += 0.5 * a * d * d;
    }
    Ok(total)
}
