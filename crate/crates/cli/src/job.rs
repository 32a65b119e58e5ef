//! Job configuration and execution for the `sga` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sga_core::{
    make_schedule, sga_barycenter, sga_two_marginal, two_step_baseline, w2_distance, BarycenterConfig,
    BarycenterProblem, ConvergenceLog, DensityField, MapMode, OtConfig, ScheduleKind, ScheduleParams, Scheme, Source,
    StepSchedule, W2Config,
};

use crate::error::{CliError, CliResult, ExitKind};
use crate::fieldfile::{save_density, save_potential};
use crate::fixtures::{oracle_check, rows_to_csv, rows_to_table};
use crate::imageio::{export_visual, load_density};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ot,
    Barycenter,
    Distance,
    OracleCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ot => "ot",
            Command::Barycenter => "barycenter",
            Command::Distance => "distance",
            Command::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub command: Command,
    /// `[μ, ν]` for `ot`, `[a, b]` for `distance`, the marginals for `barycenter`.
    pub inputs: Vec<PathBuf>,
    /// Barycenter weights; `None` means uniform. Zero weights drop their input.
    pub weights: Option<Vec<f64>>,
    /// Resample image inputs to this shape.
    pub shape: Option<Vec<usize>>,
    pub scheme: Scheme,
    pub schedule: ScheduleKind,
    pub step: f64,
    pub radius: Option<f64>,
    pub lipschitz: Option<f64>,
    pub iters: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub mode: MapMode,
    pub floor: f64,
    /// `ot`: run the projected back-and-forth baseline instead of plain ascent.
    pub bfm: bool,
    pub source: Source,
    /// Iterations of the distance solver used for `B(ρ̂)` and `distance`; 0 skips `B`.
    pub primal_iters: usize,
}

impl JobConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            weights: None,
            shape: None,
            scheme: Scheme::Parallel,
            schedule: ScheduleKind::Constant,
            step: 0.1,
            radius: None,
            lipschitz: None,
            iters: 300,
            eval_every: 1,
            seed: 0,
            out: None,
            mode: MapMode::Argmin,
            floor: 0.0,
            bfm: false,
            source: Source::Average,
            primal_iters: 400,
        }
    }

    /// Checks counts, parameters and that every input is readable.
    pub fn validate(&self) -> CliResult<()> {
        let need = |n: usize| {
            if self.inputs.len() == n {
                Ok(())
            } else {
                Err(CliError::Config(format!("{} takes {n} inputs, got {}", self.command.name(), self.inputs.len())))
            }
        };
        match self.command {
            Command::Ot | Command::Distance => need(2)?,
            Command::OracleCheck => need(0)?,
            Command::Barycenter => {
                if self.inputs.len() < 2 {
                    return Err(CliError::Config("barycenter needs at least 2 inputs".into()));
                }
                if let Some(w) = &self.weights {
                    if w.len() != self.inputs.len() {
                        return Err(CliError::Config(format!(
                            "{} weights given for {} inputs",
                            w.len(),
                            self.inputs.len()
                        )));
                    }
                }
            }
        }
        if self.iters == 0 || self.eval_every == 0 {
            return Err(CliError::Config("--iters and --eval-every must be at least 1".into()));
        }
        if !(self.floor.is_finite() && self.floor >= 0.0) {
            return Err(CliError::Config(format!("--floor must be nonnegative, got {}", self.floor)));
        }
        if matches!(self.command, Command::Distance) && self.primal_iters == 0 {
            return Err(CliError::Config("distance needs a positive iteration count".into()));
        }
        self.schedule()?;
        for p in &self.inputs {
            std::fs::File::open(p).map_err(|e| CliError::read(p, e))?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> CliResult<StepSchedule> {
        let params = ScheduleParams {
            eta0: Some(self.step),
            radius: self.radius,
            lipschitz: self.lipschitz,
            horizon: Some(self.iters),
        };
        make_schedule(self.schedule, params).map_err(|e| CliError::Config(e.to_string()))
    }

    fn w2_config(&self) -> CliResult<W2Config> {
        Ok(W2Config {
            ot: OtConfig::new(StepSchedule::constant(0.1).map_err(|e| CliError::Config(e.to_string()))?, self.primal_iters.max(1)),
            back_and_forth: true,
        })
    }

    /// Configuration echo for the report.
    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command.name(),
            "inputs": self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "weights": self.weights,
            "grid": self.shape,
            "scheme": format!("{:?}", self.scheme).to_lowercase(),
            "schedule": format!("{:?}", self.schedule),
            "step": self.step,
            "radius": self.radius,
            "lipschitz": self.lipschitz,
            "iters": self.iters,
            "eval_every": self.eval_every,
            "seed": self.seed,
            "map_mode": format!("{:?}", self.mode).to_lowercase(),
            "floor": self.floor,
            "bfm": self.bfm,
            "source": match self.source { Source::Average => "average".to_string(), Source::Marginal(i) => format!("marginal:{i}") },
            "primal_iters": self.primal_iters,
        })
    }
}

/// What a finished job prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct JobReport {
    pub stdout: String,
    pub exit: ExitKind,
}

fn out_dir(cfg: &JobConfig) -> CliResult<Option<&Path>> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::write(path, e))
}

fn write_logs(dir: &Path, log: &ConvergenceLog, value_name: &str) -> CliResult<()> {
    write_text(&dir.join("convergence.csv"), &log.to_csv(value_name))?;
    write_text(&dir.join("rate.csv"), &log.rate_csv())
}

fn write_summary(dir: &Path, summary: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| CliError::write(dir, e))?;
    write_text(&dir.join("summary.json"), &(text + "\n"))
}

fn load_all(cfg: &JobConfig) -> CliResult<Vec<DensityField>> {
    let fields = cfg
        .inputs
        .iter()
        .map(|p| load_density(p, cfg.shape.as_deref(), cfg.floor))
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(first) = fields.first() {
        if let Some((i, f)) = fields.iter().enumerate().find(|(_, f)| f.grid() != first.grid()) {
            return Err(CliError::Config(format!(
                "{} has shape {:?}, {} has {:?}; pass --grid to resample",
                cfg.inputs[i].display(),
                f.grid().shape(),
                cfg.inputs[0].display(),
                first.grid().shape()
            )));
        }
    }
    Ok(fields)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Runs one job and writes its artifacts.
pub fn run_job(cfg: &JobConfig) -> CliResult<JobReport> {
    cfg.validate()?;
    let start = Instant::now();
    match cfg.command {
        Command::Ot => run_ot(cfg, start),
        Command::Barycenter => run_barycenter(cfg, start),
        Command::Distance => run_distance(cfg, start),
        Command::OracleCheck => run_oracle_check(cfg),
    }
}

fn run_ot(cfg: &JobConfig, start: Instant) -> CliResult<JobReport> {
    let fields = load_all(cfg)?;
    let (mu, nu) = (&fields[0], &fields[1]);
    let mut ot = OtConfig::new(cfg.schedule()?, cfg.iters);
    ot.eval_every = cfg.eval_every;
    ot.mode = cfg.mode;
    let result = if cfg.bfm { two_step_baseline(mu, nu, &ot, true)? } else { sga_two_marginal(mu, nu, &ot, None)? };
    let best_t = result.log.best().map(|r| r.t);
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir(cfg)? {
        save_potential(&result.f_best, &dir.join("potential.sgaf"))?;
        write_logs(dir, &result.log, "I")?;
        write_summary(
            dir,
            &json!({
                "I_best": result.i_best,
                "w2": result.w2,
                "best_t": best_t,
                "solver": if cfg.bfm { "back-and-forth" } else { "sga" },
                "wall_time_s": elapsed,
                "config": cfg.to_json(),
            }),
        )?;
    }
    Ok(JobReport {
        stdout: format!("I_best {:.12e}\nw2 {:.12e}\nwall_time_s {elapsed:.3}\n", result.i_best, result.w2),
        exit: ExitKind::Success,
    })
}

fn run_barycenter(cfg: &JobConfig, start: Instant) -> CliResult<JobReport> {
    let fields = load_all(cfg)?;
    let raw = cfg.weights.clone().unwrap_or_else(|| vec![1.0; fields.len()]);
    let kept: Vec<usize> = raw.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect();
    let prob = BarycenterProblem::from_raw_weights(fields, &raw).map_err(|e| CliError::Config(e.to_string()))?;
    let mut bc = BarycenterConfig::new(cfg.scheme, cfg.schedule()?, cfg.iters);
    bc.seed = cfg.seed;
    bc.eval_every = cfg.eval_every;
    bc.mode = cfg.mode;
    bc.source = cfg.source;
    bc.primal = if cfg.primal_iters > 0 { Some(cfg.w2_config()?) } else { None };
    let r = sga_barycenter(&prob, &bc)?;
    let elapsed = start.elapsed().as_secs_f64();
    let rel_gap = match (r.b_value, r.gap) {
        (Some(b), Some(g)) if b > 0.0 => Some(g / b),
        _ => None,
    };
    let mut stdout = format!("D_best {:.12e}\n", r.d_best);
    if let (Some(b), Some(g)) = (r.b_value, r.gap) {
        stdout += &format!("B_value {b:.12e}\ngap {g:.6e}\n");
    }
    stdout += &format!("wall_time_s {elapsed:.3}\n");
    if let Some(dir) = out_dir(cfg)? {
        save_density(&r.barycenter, &dir.join("barycenter.sgaf"))?;
        write_logs(dir, &r.log, "D")?;
        if r.barycenter.grid().dim() >= 2 {
            export_visual(&r.barycenter, &dir.join("barycenter_view"))?;
        }
        write_summary(
            dir,
            &json!({
                "D_best": finite_or_null(r.d_best),
                "B_value": r.b_value,
                "gap": r.gap,
                "relative_gap": rel_gap,
                "best_t": r.log.best().map(|x| x.t),
                "marginals_used": kept,
                "weights_used": prob.weights().as_slice(),
                "seed": cfg.seed,
                "wall_time_s": elapsed,
                "config": cfg.to_json(),
            }),
        )?;
    }
    Ok(JobReport { stdout, exit: ExitKind::Success })
}

fn run_distance(cfg: &JobConfig, start: Instant) -> CliResult<JobReport> {
    let fields = load_all(cfg)?;
    let w2 = w2_distance(&fields[0], &fields[1], &cfg.w2_config()?)?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir(cfg)? {
        write_summary(dir, &json!({ "w2": w2, "wall_time_s": elapsed, "config": cfg.to_json() }))?;
    }
    Ok(JobReport { stdout: format!("w2 {w2:.12e}\n"), exit: ExitKind::Success })
}

fn run_oracle_check(cfg: &JobConfig) -> CliResult<JobReport> {
    let dir = out_dir(cfg)?;
    let rows = oracle_check(dir)?;
    if let Some(dir) = dir {
        write_text(&dir.join("oracle_check.csv"), &rows_to_csv(&rows))?;
    }
    let failed = rows.iter().filter(|r| !r.passed()).count();
    let mut stdout = rows_to_table(&rows);
    stdout += &format!("{} of {} checks within tolerance\n", rows.len() - failed, rows.len());
    Ok(JobReport { stdout, exit: if failed == 0 { ExitKind::Success } else { ExitKind::CheckFailed } })
}
