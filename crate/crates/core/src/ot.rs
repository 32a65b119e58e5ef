//! Two-marginal optimal transport by Sobolev gradient ascent on the
//! Kantorovich dual `I(f) = ∫ f dμ + ∫ f^c dν`.
//!
//! [`sga_two_marginal`] is plain ascent with no c-concavity projection.
//! [`two_step_baseline`] applies the double c-transform after every step
//! and can alternate with the twin problem (`ν`, `μ`) in back-and-forth
//! fashion. Both record `I` at every iterate and return the best one.

use crate::convergence::{ConvergenceLog, IterRecord};
use crate::ctransform::{c_transform_fast, CTransformResult};
use crate::error::{Error, Result};
use crate::grid::{integrate_values, DensityField, PotentialField};
use crate::poisson::{h1_norm, SpectralPlan};
use crate::transport::{gradient_map, pushforward, MapMode, TransportMap};

/// Slack allowed when checking that the double c-transform does not lower `I`.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Annealing,
    TheoreticalConstant,
    TheoreticalAnnealing,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "annealing" => Ok(Self::Annealing),
            "theoretical-constant" => Ok(Self::TheoreticalConstant),
            "theoretical-annealing" => Ok(Self::TheoreticalAnnealing),
            other => Err(Error::InvalidParams(format!("unknown schedule `{other}`"))),
        }
    }
}

/// Inputs to [`make_schedule`]. The theoretical schedules need an estimate
/// of the initial distance to the optimum (`radius`) and of the gradient
/// bound (`lipschitz`); neither is known ahead of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScheduleParams {
    pub eta0: Option<f64>,
    pub radius: Option<f64>,
    pub lipschitz: Option<f64>,
    pub horizon: Option<usize>,
}

/// Step sizes `η_t`, `t = 0, 1, …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    kind: ScheduleKind,
    eta0: f64,
}

impl StepSchedule {
    pub fn constant(eta0: f64) -> Result<Self> {
        make_schedule(ScheduleKind::Constant, ScheduleParams { eta0: Some(eta0), ..Default::default() })
    }

    pub fn annealing(eta0: f64) -> Result<Self> {
        make_schedule(ScheduleKind::Annealing, ScheduleParams { eta0: Some(eta0), ..Default::default() })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Scale of the schedule: `η_0` for the plain kinds, `R/M` (annealing)
    /// or `R/(M√T)` (constant) for the theoretical ones.
    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn step(&self, t: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant | ScheduleKind::TheoreticalConstant => self.eta0,
            ScheduleKind::Annealing | ScheduleKind::TheoreticalAnnealing => self.eta0 / ((t + 1) as f64).sqrt(),
        }
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(Error::InvalidParams(format!("{name} must be positive, got {x}"))),
        None => Err(Error::InvalidParams(format!("{name} is required"))),
    }
}

pub fn make_schedule(kind: ScheduleKind, params: ScheduleParams) -> Result<StepSchedule> {
    let eta0 = match kind {
        ScheduleKind::Constant | ScheduleKind::Annealing => positive("eta0", params.eta0)?,
        ScheduleKind::TheoreticalConstant => {
            let r = positive("radius", params.radius)?;
            let m = positive("lipschitz", params.lipschitz)?;
            let t = match params.horizon {
                Some(t) if t > 0 => t,
                _ => return Err(Error::InvalidParams("horizon T must be positive".into())),
            };
            r / (m * (t as f64).sqrt())
        }
        ScheduleKind::TheoreticalAnnealing => positive("radius", params.radius)? / positive("lipschitz", params.lipschitz)?,
    };
    Ok(StepSchedule { kind, eta0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtConfig {
    pub schedule: StepSchedule,
    pub iters: usize,
    /// Log and track the best iterate every `eval_every` iterations.
    pub eval_every: usize,
    pub mode: MapMode,
}

impl OtConfig {
    pub fn new(schedule: StepSchedule, iters: usize) -> Self {
        Self { schedule, iters, eval_every: 1, mode: MapMode::Argmin }
    }

    fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidParams("iteration count must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParams("eval-every must be at least 1".into()));
        }
        Ok(())
    }

    fn evaluated(&self, t: usize) -> bool {
        t.is_multiple_of(self.eval_every) || t == self.iters
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtResult {
    pub f_best: PotentialField,
    pub i_best: f64,
    pub w2: f64,
    pub log: ConvergenceLog,
}

/// Objective, pushforward and Sobolev gradient of `I` at one potential.
#[derive(Debug, Clone)]
pub struct OtEval {
    pub ctransform: CTransformResult,
    pub value: f64,
    pub pushforward: DensityField,
    pub gradient: PotentialField,
    pub grad_h1: f64,
}

/// Map `T_{f^c}` for a computed transform.
pub(crate) fn map_for(ct: &CTransformResult, mode: MapMode) -> Result<TransportMap> {
    match mode {
        MapMode::Argmin => Ok(TransportMap::from_ctransform(ct)),
        MapMode::Gradient => gradient_map(&ct.fc),
    }
}

/// Evaluates `I(f)` and `∇I(f) = (−Δ)⁻¹(μ − (T_{f^c})_# ν)`.
pub fn ot_gradient(f: &PotentialField, mu: &DensityField, nu: &DensityField, mode: MapMode) -> Result<OtEval> {
    let ct = c_transform_fast(f)?;
    eval_with(f, ct, mu, nu, mode)
}

fn eval_with(f: &PotentialField, ct: CTransformResult, mu: &DensityField, nu: &DensityField, mode: MapMode) -> Result<OtEval> {
    let grid = *f.grid();
    let value = integrate_values(f.values(), mu) + integrate_values(ct.fc.values(), nu);
    let push = pushforward(nu, &map_for(&ct, mode)?)?;
    let rhs: Vec<f64> = mu.values().iter().zip(push.values()).map(|(a, b)| a - b).collect();
    let plan = SpectralPlan::for_grid(&grid);
    let gradient = PotentialField::from_raw(grid, plan.solve_values(&rhs));
    let grad_h1 = h1_norm(&gradient)?;
    Ok(OtEval { ctransform: ct, value, pushforward: push, gradient, grad_h1 })
}

fn check_inputs(mu: &DensityField, nu: &DensityField, f0: Option<&PotentialField>) -> Result<()> {
    if mu.grid() != nu.grid() || f0.is_some_and(|f| f.grid() != mu.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn finish(f_best: PotentialField, log: ConvergenceLog) -> OtResult {
    let i_best = log.best_value();
    OtResult { f_best, i_best, w2: (2.0 * i_best.max(0.0)).sqrt(), log }
}

/// Iterator-style driver for plain Sobolev gradient ascent on `I`.
#[derive(Debug, Clone)]
pub struct SgaOt<'a> {
    mu: &'a DensityField,
    nu: &'a DensityField,
    f: PotentialField,
    mode: MapMode,
}

impl<'a> SgaOt<'a> {
    pub fn new(mu: &'a DensityField, nu: &'a DensityField, f0: Option<PotentialField>, mode: MapMode) -> Result<Self> {
        check_inputs(mu, nu, f0.as_ref())?;
        let f = f0.unwrap_or_else(|| PotentialField::zeros(*mu.grid()));
        f.check_finite()?;
        Ok(Self { mu, nu, f, mode })
    }

    pub fn potential(&self) -> &PotentialField {
        &self.f
    }

    pub fn evaluate(&self) -> Result<OtEval> {
        ot_gradient(&self.f, self.mu, self.nu, self.mode)
    }

    /// `f ← f + η ∇I(f)` using a gradient from [`SgaOt::evaluate`].
    pub fn advance(&mut self, eval: &OtEval, eta: f64) -> Result<()> {
        self.f.axpy(eta, &eval.gradient)
    }
}

/// Plain Sobolev gradient ascent from `f0` (default zero) for `cfg.iters` steps.
pub fn sga_two_marginal(mu: &DensityField, nu: &DensityField, cfg: &OtConfig, f0: Option<PotentialField>) -> Result<OtResult> {
    cfg.validate()?;
    let mut solver = SgaOt::new(mu, nu, f0, cfg.mode)?;
    let mut log = ConvergenceLog::new();
    let mut f_best = solver.potential().clone();
    for t in 0..=cfg.iters {
        let eval = solver.evaluate();
        let eval = match eval {
            Ok(e) if e.value.is_finite() => e,
            Ok(_) | Err(Error::NonFiniteInput { .. }) => {
                return Err(Error::NonFiniteIterate { iteration: t, best_value: log.best_value() })
            }
            Err(e) => return Err(e),
        };
        let eta = cfg.schedule.step(t);
        if cfg.evaluated(t) && log.push(IterRecord { t, value: eval.value, grad_h1: eval.grad_h1, eta }) {
            f_best = solver.potential().clone();
        }
        if t == cfg.iters {
            break;
        }
        solver.advance(&eval, eta)?;
    }
    Ok(finish(f_best, log))
}

/// `I` at `f` given its transform.
fn objective(f: &PotentialField, fc: &PotentialField, mu: &DensityField, nu: &DensityField) -> f64 {
    integrate_values(f.values(), mu) + integrate_values(fc.values(), nu)
}

/// Ascent step followed by the double c-transform, for the problem with
/// potential `f` against `(mu, nu)`. Returns `(f^{cc}, its transform)`.
fn projected_step(
    f: &PotentialField,
    gradient: &PotentialField,
    eta: f64,
    mu: &DensityField,
    nu: &DensityField,
    t: usize,
) -> Result<(PotentialField, CTransformResult)> {
    let mut half = f.clone();
    half.axpy(eta, gradient)?;
    let half_ct = c_transform_fast(&half).map_err(|_| Error::NonFiniteIterate { iteration: t, best_value: f64::NAN })?;
    let value_half = objective(&half, &half_ct.fc, mu, nu);
    let projected = c_transform_fast(&half_ct.fc)?.fc;
    let projected_ct = c_transform_fast(&projected)?;
    let value_new = objective(&projected, &projected_ct.fc, mu, nu);
    if value_new < value_half - MONOTONE_SLACK * value_half.abs().max(1.0) {
        return Err(Error::MonotonicityViolated { iteration: t, drop: value_half - value_new });
    }
    Ok((projected, projected_ct))
}

/// Two-step ascent: gradient step, then `f ← f^{cc}`. With
/// `back_and_forth`, odd iterations step on the twin potential `ψ = f^c`
/// for the swapped problem and transfer back through `f = ψ^c`.
pub fn two_step_baseline(mu: &DensityField, nu: &DensityField, cfg: &OtConfig, back_and_forth: bool) -> Result<OtResult> {
    cfg.validate()?;
    check_inputs(mu, nu, None)?;
    let grid = *mu.grid();
    let mut f = PotentialField::zeros(grid);
    let mut ct = c_transform_fast(&f)?;
    let mut log = ConvergenceLog::new();
    let mut f_best = f.clone();
    for t in 0..=cfg.iters {
        let eval = eval_with(&f, ct, mu, nu, cfg.mode)?;
        if !eval.value.is_finite() {
            return Err(Error::NonFiniteIterate { iteration: t, best_value: log.best_value() });
        }
        let eta = cfg.schedule.step(t);
        if cfg.evaluated(t) && log.push(IterRecord { t, value: eval.value, grad_h1: eval.grad_h1, eta }) {
            f_best = f.clone();
        }
        if t == cfg.iters {
            break;
        }
        let nonfinite = |e: Error| match e {
            Error::NonFiniteInput { .. } | Error::NonFiniteIterate { .. } => {
                Error::NonFiniteIterate { iteration: t, best_value: log.best_value() }
            }
            other => other,
        };
        if back_and_forth && t % 2 == 1 {
            let psi = eval.ctransform.fc;
            let twin = ot_gradient(&psi, nu, mu, cfg.mode).map_err(nonfinite)?;
            let (_, psi_new_ct) = projected_step(&psi, &twin.gradient, eta, nu, mu, t).map_err(nonfinite)?;
            f = psi_new_ct.fc;
            ct = c_transform_fast(&f).map_err(nonfinite)?;
        } else {
            let (f_new, f_new_ct) = projected_step(&f, &eval.gradient, eta, mu, nu, t).map_err(nonfinite)?;
            f = f_new;
            ct = f_new_ct;
        }
    }
    Ok(finish(f_best, log))
}

/// Solver settings for [`w2_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Config {
    pub ot: OtConfig,
    pub back_and_forth: bool,
}

impl Default for W2Config {
    fn default() -> Self {
        Self {
            ot: OtConfig::new(StepSchedule { kind: ScheduleKind::Constant, eta0: 0.1 }, 400),
            back_and_forth: true,
        }
    }
}

/// `W₂(μ, ν) = √(2 I_best)` from the projected baseline.
pub fn w2_distance(mu: &DensityField, nu: &DensityField, cfg: &W2Config) -> Result<f64> {
    Ok(two_step_baseline(mu, nu, &cfg.ot, cfg.back_and_forth)?.w2)
}
