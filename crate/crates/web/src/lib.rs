//! Browser bindings for a small interactive demo.
//!
//! Each exported function has a plain Rust twin returning `Result<_, String>`
//! so the logic can be tested natively.

use sga_core::transport::displacement_interpolation;
use sga_core::{
    c_transform_fast, double_c_transform, sga_barycenter, transport_map_from_potential, two_step_baseline,
    BarycenterConfig, BarycenterProblem, DensityField, GridSpec, MapMode, OtConfig, PotentialField, Scheme,
    StepSchedule,
};
use wasm_bindgen::prelude::*;

pub const SHAPES: [&str; 4] = ["disk", "ring", "square", "cross"];

/// Indicator of a built-in shape on an `n × n` grid, with a faint floor so
/// every cell carries some mass.
pub fn shape_density(name: &str, n: usize) -> Result<DensityField, String> {
    let g = GridSpec::square(n).map_err(|e| e.to_string())?;
    let inside: fn(f64, f64) -> bool = match name {
        "disk" => |y, x| y * y + x * x < 0.09,
        "ring" => |y, x| (0.04..0.1225).contains(&(y * y + x * x)),
        "square" => |y, x| y.abs() < 0.28 && x.abs() < 0.28,
        "cross" => |y, x| (y.abs() < 0.08 && x.abs() < 0.35) || (x.abs() < 0.08 && y.abs() < 0.35),
        other => return Err(format!("unknown shape `{other}`")),
    };
    DensityField::from_fn(g, |p| if inside(p[0] - 0.5, p[1] - 0.5) { 1.0 } else { 1e-3 }).map_err(|e| e.to_string())
}

/// Barycenter of the four shapes with the given (unnormalised) weights.
pub fn shape_barycenter(n: usize, weights: &[f64], iters: usize) -> Result<Vec<f64>, String> {
    let marginals = SHAPES.iter().map(|s| shape_density(s, n)).collect::<Result<Vec<_>, _>>()?;
    if weights.len() != SHAPES.len() {
        return Err(format!("expected {} weights", SHAPES.len()));
    }
    // A single positive weight is its own barycenter.
    let positive: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if positive.len() == 1 {
        return Ok(marginals[positive[0]].values().to_vec());
    }
    let prob = BarycenterProblem::from_raw_weights(marginals, weights).map_err(|e| e.to_string())?;
    let schedule = StepSchedule::constant(0.1).map_err(|e| e.to_string())?;
    let mut cfg = BarycenterConfig::new(Scheme::Parallel, schedule, iters);
    cfg.primal = None;
    let r = sga_barycenter(&prob, &cfg).map_err(|e| e.to_string())?;
    Ok(r.barycenter.into_values())
}

/// `[f^c, f^cc]` of a potential sampled on a 1D grid, concatenated.
pub fn c_transform_curve(values: &[f64]) -> Result<Vec<f64>, String> {
    let g = GridSpec::line(values.len()).map_err(|e| e.to_string())?;
    let f = PotentialField::new(g, values.to_vec()).map_err(|e| e.to_string())?;
    let fc = c_transform_fast(&f).map_err(|e| e.to_string())?.fc;
    let fcc = double_c_transform(&f).map_err(|e| e.to_string())?;
    let mut out = fc.into_values();
    out.extend_from_slice(fcc.values());
    Ok(out)
}

/// Frames of the displacement interpolation from shape `from` to `to` at
/// `s = k/(frames−1)`, concatenated.
pub fn shape_interpolation(from: &str, to: &str, n: usize, frames: usize, iters: usize) -> Result<Vec<f64>, String> {
    if frames < 2 {
        return Err("need at least two frames".into());
    }
    let a = shape_density(from, n)?;
    let b = shape_density(to, n)?;
    // The map of the potential for (b, a) pushes `a` onto `b`.
    let schedule = StepSchedule::constant(0.1).map_err(|e| e.to_string())?;
    let ot = two_step_baseline(&b, &a, &OtConfig::new(schedule, iters), true).map_err(|e| e.to_string())?;
    let map = transport_map_from_potential(&ot.f_best, MapMode::Argmin).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(frames * n * n);
    for k in 0..frames {
        let s = k as f64 / (frames - 1) as f64;
        let frame = displacement_interpolation(&a, &map, s).map_err(|e| e.to_string())?;
        out.extend_from_slice(frame.values());
    }
    Ok(out)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = shapeNames)]
pub fn shape_names() -> Vec<String> {
    SHAPES.iter().map(|s| s.to_string()).collect()
}

#[wasm_bindgen(js_name = shapeDensity)]
pub fn shape_density_js(name: &str, n: usize) -> Result<Vec<f64>, JsError> {
    shape_density(name, n).map(DensityField::into_values).map_err(js)
}

#[wasm_bindgen(js_name = shapeBarycenter)]
pub fn shape_barycenter_js(n: usize, weights: &[f64], iters: usize) -> Result<Vec<f64>, JsError> {
    shape_barycenter(n, weights, iters).map_err(js)
}

#[wasm_bindgen(js_name = cTransformCurve)]
pub fn c_transform_curve_js(values: &[f64]) -> Result<Vec<f64>, JsError> {
    c_transform_curve(values).map_err(js)
}

#[wasm_bindgen(js_name = shapeInterpolation)]
pub fn shape_interpolation_js(from: &str, to: &str, n: usize, frames: usize, iters: usize) -> Result<Vec<f64>, JsError> {
    shape_interpolation(from, to, n, frames, iters).map_err(js)
}
