//! Built-in 1D fixtures and the oracle-versus-solver table behind
//! `sga oracle-check`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sga_core::oracles::{default_samples, quantile_barycenter_1d, quantile_w2_1d};
use sga_core::{
    sga_barycenter, sga_two_marginal, two_step_baseline, BarycenterConfig, BarycenterProblem, DensityField, GridSpec,
    OtConfig, Scheme, StepSchedule, Weights,
};

use crate::error::CliResult;
use crate::fieldfile::save_density;

pub const FIXTURE_CELLS: usize = 256;
/// Relative tolerance on two-marginal distances.
pub const DISTANCE_RTOL: f64 = 0.01;
/// Barycenter tolerance as a fraction of the domain diameter.
pub const BARYCENTER_TOL: f64 = 0.01;
pub const OT_ITERS: usize = 2000;

fn bump(x: f64, centre: f64, width: f64) -> f64 {
    (-(x - centre).powi(2) / (2.0 * width * width)).exp()
}

/// Named 1D densities on [`FIXTURE_CELLS`] cells.
pub fn fixture(name: &str) -> Option<DensityField> {
    let g = GridSpec::line(FIXTURE_CELLS).ok()?;
    let n = FIXTURE_CELLS;
    let d = match name {
        "spike-left" => DensityField::one_hot(g, n / 4),
        "spike-right" => DensityField::one_hot(g, 3 * n / 4),
        "half-left" => DensityField::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }),
        "half-right" => DensityField::from_fn(g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 }),
        "bimodal" => DensityField::from_fn(g, |x| 0.05 + bump(x[0], 0.25, 0.06) + 0.6 * bump(x[0], 0.7, 0.1)),
        "ramp" => DensityField::from_fn(g, |x| 0.2 + x[0] * x[0]),
        "wave" => DensityField::from_fn(g, |x| 1.0 + 0.8 * (3.0 * PI * x[0]).sin()),
        "narrow" => DensityField::from_fn(g, |x| 0.02 + bump(x[0], 0.55, 0.04)),
        _ => return None,
    };
    d.ok()
}

pub const DISTANCE_PAIRS: [(&str, &str); 4] =
    [("spike-left", "spike-right"), ("half-left", "half-right"), ("bimodal", "ramp"), ("wave", "narrow")];

pub const BARYCENTER_SET: [&str; 4] = ["bimodal", "ramp", "wave", "narrow"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub case: String,
    pub solver: &'static str,
    pub oracle: f64,
    pub value: f64,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

/// Runs every fixture through the solvers and the oracles. Fixture
/// densities are written to `out` when given.
pub fn oracle_check(out: Option<&Path>) -> CliResult<Vec<CheckRow>> {
    let k = default_samples(FIXTURE_CELLS);
    let cfg = OtConfig::new(StepSchedule::constant(0.1)?, OT_ITERS);
    let get = |name: &str| fixture(name).expect("fixture names are fixed");
    let mut rows = Vec::new();
    for (a, b) in DISTANCE_PAIRS {
        let (mu, nu) = (get(a), get(b));
        let oracle = quantile_w2_1d(&mu, &nu, k)?;
        let case = format!("{a}/{b}");
        let sga = sga_two_marginal(&mu, &nu, &cfg, None)?.w2;
        let bfm = two_step_baseline(&mu, &nu, &cfg, true)?.w2;
        for (solver, value) in [("sga", sga), ("back-and-forth", bfm)] {
            let error = (value - oracle).abs() / oracle;
            rows.push(CheckRow { case: case.clone(), solver, oracle, value, error, tolerance: DISTANCE_RTOL });
        }
    }

    let marginals: Vec<_> = BARYCENTER_SET.iter().map(|n| get(n)).collect();
    let prob = BarycenterProblem::new(marginals, Weights::uniform(BARYCENTER_SET.len())?)?;
    let reference = quantile_barycenter_1d(&prob, k)?;
    for (scheme, solver) in [(Scheme::Parallel, "sga-parallel"), (Scheme::Sequential, "sga-sequential"), (Scheme::Random, "sga-random")] {
        let mut bcfg = BarycenterConfig::new(scheme, StepSchedule::constant(0.1)?, OT_ITERS);
        bcfg.primal = None;
        let r = sga_barycenter(&prob, &bcfg)?;
        let error = quantile_w2_1d(&r.barycenter, &reference, k)?;
        rows.push(CheckRow {
            case: BARYCENTER_SET.join("+"),
            solver,
            oracle: 0.0,
            value: error,
            error,
            tolerance: BARYCENTER_TOL,
        });
    }

    if let Some(dir) = out {
        let mut names: Vec<&str> = DISTANCE_PAIRS.iter().flat_map(|(a, b)| [*a, *b]).collect();
        names.extend(BARYCENTER_SET);
        names.sort_unstable();
        names.dedup();
        for name in names {
            save_density(&get(name), &dir.join(format!("{name}.sgaf")))?;
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("case,solver,oracle,value,error,tolerance,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.17e},{:.17e},{:.6e},{:.6e},{}",
            r.case,
            r.solver,
            r.oracle,
            r.value,
            r.error,
            r.tolerance,
            u8::from(r.passed())
        );
    }
    s
}

pub fn rows_to_table(rows: &[CheckRow]) -> String {
    let mut s = format!("{:<26} {:<15} {:>10} {:>10} {:>10} {:>8}  result\n", "case", "solver", "oracle", "solver", "error", "tol");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<26} {:<15} {:>10.6} {:>10.6} {:>10.2e} {:>8.1e}  {}",
            r.case,
            r.solver,
            r.oracle,
            r.value,
            r.error,
            r.tolerance,
            if r.passed() { "ok" } else { "FAIL" }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_exist() {
        for (a, b) in DISTANCE_PAIRS {
            assert!(fixture(a).is_some() && fixture(b).is_some());
        }
        assert!(BARYCENTER_SET.iter().all(|n| fixture(n).is_some()));
        assert!(fixture("missing").is_none());
    }

    #[test]
    fn spike_oracle_is_half() {
        let w = quantile_w2_1d(&fixture("spike-left").unwrap(), &fixture("spike-right").unwrap(), 5120).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
    }
}
