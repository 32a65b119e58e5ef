use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sga_cli::{run_job, CliError, Command, JobConfig};
use sga_core::{MapMode, ScheduleKind, Scheme, Source};

/// Exact Wasserstein barycenters and distances on regular grids.
#[derive(Parser)]
#[command(name = "sga", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Optimal transport between two densities.
    Ot {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Use the projected back-and-forth baseline instead of plain ascent.
        #[arg(long)]
        bfm: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Weighted barycenter of two or more densities.
    Barycenter {
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        /// Comma-separated, one per input; normalised to sum 1.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value = "parallel", value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `average` or `marginal:<i>`.
        #[arg(long, default_value = "average", value_parser = parse_source)]
        source: Source,
        /// Iterations per distance solve when evaluating B; 0 skips it.
        #[arg(long, default_value_t = 400)]
        primal_iters: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W2 distance between two densities.
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 400)]
        iters: usize,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare solvers against the built-in 1D oracles.
    OracleCheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// constant, annealing, theoretical-constant or theoretical-annealing.
    #[arg(long, default_value = "constant", value_parser = parse_schedule)]
    schedule: ScheduleKind,
    /// Distance-to-optimum estimate for the theoretical schedules.
    #[arg(long)]
    radius: Option<f64>,
    /// Gradient-bound estimate for the theoretical schedules.
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    /// argmin or gradient.
    #[arg(long, default_value = "argmin", value_parser = parse_mode)]
    map_mode: MapMode,
}

#[derive(Args)]
struct InputArgs {
    /// Resample image inputs to `rows,cols`.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Added to every raw input value before normalisation.
    #[arg(long, default_value_t = 0.0)]
    floor: f64,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: sga_core::Error| e.to_string())
}

fn parse_schedule(s: &str) -> Result<ScheduleKind, String> {
    s.parse().map_err(|e: sga_core::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<MapMode, String> {
    s.parse().map_err(|e: sga_core::Error| e.to_string())
}

fn parse_source(s: &str) -> Result<Source, String> {
    if s == "average" {
        return Ok(Source::Average);
    }
    s.strip_prefix("marginal:")
        .and_then(|i| i.parse().ok())
        .map(Source::Marginal)
        .ok_or_else(|| format!("expected `average` or `marginal:<i>`, got `{s}`"))
}

fn apply_run(cfg: &mut JobConfig, run: RunArgs) {
    cfg.iters = run.iters;
    cfg.step = run.step;
    cfg.schedule = run.schedule;
    cfg.radius = run.radius;
    cfg.lipschitz = run.lipschitz;
    cfg.eval_every = run.eval_every;
    cfg.mode = run.map_mode;
}

fn apply_input(cfg: &mut JobConfig, input: InputArgs) {
    cfg.shape = input.grid;
    cfg.floor = input.floor;
}

fn job_from(cli: Cli) -> JobConfig {
    match cli.command {
        Sub::Ot { mu, nu, bfm, run, input, out } => {
            let mut cfg = JobConfig::new(Command::Ot);
            cfg.inputs = vec![mu, nu];
            cfg.bfm = bfm;
            cfg.out = out;
            apply_run(&mut cfg, run);
            apply_input(&mut cfg, input);
            cfg
        }
        Sub::Barycenter { inputs, weights, scheme, seed, source, primal_iters, run, input, out } => {
            let mut cfg = JobConfig::new(Command::Barycenter);
            cfg.inputs = inputs;
            cfg.weights = weights;
            cfg.scheme = scheme;
            cfg.seed = seed;
            cfg.source = source;
            cfg.primal_iters = primal_iters;
            cfg.out = out;
            apply_run(&mut cfg, run);
            apply_input(&mut cfg, input);
            cfg
        }
        Sub::Distance { a, b, iters, input, out } => {
            let mut cfg = JobConfig::new(Command::Distance);
            cfg.inputs = vec![a, b];
            cfg.primal_iters = iters;
            cfg.out = out;
            apply_input(&mut cfg, input);
            cfg
        }
        Sub::OracleCheck { out } => {
            let mut cfg = JobConfig::new(Command::OracleCheck);
            cfg.out = out;
            cfg
        }
    }
}

/// Caps the worker pool at `SGA_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SGA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SGA_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run_job(&job_from(cli)));
    match result {
        Ok(report) => {
            print!("{}", report.stdout);
            ExitCode::from(report.exit as u8)
        }
        Err(e) => {
            eprintln!("sga: {e}");
            ExitCode::from(e.exit_kind() as u8)
        }
    }
}
