//! Discrete c-transform for the cost `c(x, y) = ‖x − y‖² / 2`:
//!
//! `f^c(x) = min_y { ‖x − y‖²/2 − f(y) }` with `y` ranging over grid nodes.
//!
//! The cost is separable, so the minimum is taken one axis at a time. Each
//! 1D pass is a lower envelope of parabolas (the same construction used by
//! squared Euclidean distance transforms) and costs `O(n_j)` per line.
//! Passes run from the last axis to the first; the minimising node is
//! tracked per pass and composed into a full multi-index afterwards.
//!
//! Ties resolve toward the smallest index one axis at a time, outermost pass
//! (axis 0) first: among minimising nodes the smallest `y_0` wins, then among
//! those the node minimising the remaining partial cost with the smallest
//! `y_1`, and so on. Without rounding this is the smallest lexicographic
//! minimiser. The brute-force transform ranks nodes by the same key and adds
//! the per-axis costs in the same order, so the two agree bit for bit.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PotentialField, MAX_DIM};
use crate::lines::{for_each_line3, Lines};

/// Largest grid accepted by [`c_transform_brute`].
pub const BRUTE_FORCE_LIMIT: usize = 100_000;

/// A c-transform together with the minimising grid node of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CTransformResult {
    pub fc: PotentialField,
    /// Flat index of `y*(x)` for every cell `x`.
    pub argmin: Vec<usize>,
}

impl CTransformResult {
    pub fn grid(&self) -> &GridSpec {
        self.fc.grid()
    }

    /// Multi-index of `y*(x)` for the cell with flat index `cell`.
    pub fn argmin_index(&self, cell: usize) -> [usize; MAX_DIM] {
        self.grid().unravel(self.argmin[cell])
    }
}

/// Half squared distance of `steps` cells at spacing `h`.
#[inline(always)]
pub(crate) fn half_sq(steps: isize, h: f64) -> f64 {
    let t = steps as f64 * h;
    0.5 * t * t
}

/// Workspace for [`lower_envelope_line`].
#[derive(Debug, Default, Clone)]
pub struct EnvelopeScratch {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

/// One-dimensional min-plus convolution with a parabola:
/// `out[x] = min_q ( ((x − q)·h)²/2 + u[q] )`, with `arg[x]` the smallest
/// minimising `q`.
pub fn lower_envelope_line(u: &[f64], h: f64, out: &mut [f64], arg: &mut [u32], scratch: &mut EnvelopeScratch) {
    let n = u.len();
    debug_assert!(out.len() == n && arg.len() == n);
    if n == 0 {
        return;
    }
    let hh = h * h;
    let v = &mut scratch.vertices;
    let z = &mut scratch.bounds;
    v.clear();
    z.clear();
    v.resize(n, 0);
    z.resize(n + 1, 0.0);
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let scale = u.iter().fold(0.0f64, |m, a| m.max(a.abs())) + half_sq(n as isize, h);
    // breakpoint uncertainty in index units; decisions closer than this are near-ties
    let tau = 64.0 * f64::EPSILON * (scale / hh + n as f64);
    let mut ambiguous = false;
    let mut k = 0usize;
    for q in 1..n {
        loop {
            let p = v[k];
            // abscissa (in index units) where parabola q starts to undercut p
            let s = 0.5 * (p + q) as f64 + (u[q] - u[p]) / (hh * (q - p) as f64);
            ambiguous |= (s - z[k]).abs() <= tau;
            if s > z[k] {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
            if k == 0 {
                // q undercuts everything kept so far
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k -= 1;
        }
    }
    let count = k + 1;

    let cost = |x: usize, q: usize| half_sq(x as isize - q as isize, h) + u[q];
    let mut k = 0usize;
    for x in 0..n {
        let xf = x as f64;
        while z[k + 1] < xf {
            k += 1;
        }
        // Re-rank the neighbouring envelope pieces on evaluated values so that
        // rounding in the breakpoints can never select a non-minimal node.
        let mut best = v[k];
        let mut best_val = cost(x, best);
        if k > 0 {
            let c = v[k - 1];
            let val = cost(x, c);
            if val <= best_val {
                best = c;
                best_val = val;
            }
        }
        if k + 1 < count {
            let c = v[k + 1];
            let val = cost(x, c);
            if val < best_val {
                best = c;
                best_val = val;
            }
        }
        out[x] = best_val;
        arg[x] = best as u32;
    }
    if ambiguous {
        repair_near_ties(u, h, out, arg, 16.0 * f64::EPSILON * scale);
    }
}

/// Rounding in the breakpoints can drop a parabola whose evaluated cost ties
/// or beats the envelope. `cost_q − envelope` is convex in `x`, so each `q`
/// only needs a descent to its minimum and a scan of the cells within
/// `delta` of it.
fn repair_near_ties(u: &[f64], h: f64, out: &mut [f64], arg: &mut [u32], delta: f64) {
    let n = u.len();
    let cost = |x: usize, q: usize| half_sq(x as isize - q as isize, h) + u[q];
    for q in 0..n {
        let gap = |x: usize, out: &[f64]| cost(x, q) - out[x];
        let mut x = arg.partition_point(|&a| (a as usize) < q).min(n - 1);
        while x > 0 && gap(x - 1, out) < gap(x, out) {
            x -= 1;
        }
        while x + 1 < n && gap(x + 1, out) < gap(x, out) {
            x += 1;
        }
        if gap(x, out) > delta {
            continue;
        }
        let mut lo = x;
        while lo > 0 && gap(lo - 1, out) <= delta {
            lo -= 1;
        }
        let mut hi = x;
        while hi + 1 < n && gap(hi + 1, out) <= delta {
            hi += 1;
        }
        for x in lo..=hi {
            let c = cost(x, q);
            if c < out[x] || (c == out[x] && (q as u32) < arg[x]) {
                out[x] = c;
                arg[x] = q as u32;
            }
        }
    }
}

/// Exact discrete c-transform in `O(d·n)` via separable envelope passes.
pub fn c_transform_fast(f: &PotentialField) -> Result<CTransformResult> {
    f.check_finite()?;
    let grid = *f.grid();
    let n = grid.len();
    let d = grid.dim();
    let mut val: Vec<f64> = f.values().iter().map(|v| -v).collect();
    let mut args: Vec<Vec<u32>> = Vec::with_capacity(d);
    let mut line_in = vec![0.0; n];
    let mut line_out = vec![0.0; n];
    let mut line_arg = vec![0u32; n];

    for axis in (0..d).rev() {
        let lines = Lines::new(&grid, axis);
        let h = grid.spacing(axis);
        let input: &[f64] = if lines.contiguous() {
            &val
        } else {
            lines.gather(&val, &mut line_in);
            &line_in
        };
        for_each_line3(
            lines.len,
            input,
            &mut line_out,
            &mut line_arg,
            EnvelopeScratch::default,
            |u, o, a, s| lower_envelope_line(u, h, o, a, s),
        );
        let mut axis_arg = vec![0u32; n];
        if lines.contiguous() {
            val.copy_from_slice(&line_out);
            axis_arg.copy_from_slice(&line_arg);
        } else {
            lines.scatter(&line_out, &mut val);
            lines.scatter(&line_arg, &mut axis_arg);
        }
        args.push(axis_arg);
    }
    // args were pushed last axis first
    args.reverse();

    let argmin = (0..n)
        .map(|cell| {
            let mut pos = grid.unravel(cell);
            for (axis, axis_arg) in args.iter().enumerate() {
                pos[axis] = axis_arg[grid.ravel(&pos[..d])] as usize;
            }
            grid.ravel(&pos[..d])
        })
        .collect();

    Ok(CTransformResult { fc: PotentialField::from_raw(grid, val), argmin })
}

/// Exhaustive `O(n²)` c-transform. Same contract and tie rule as
/// [`c_transform_fast`]; serves as its oracle.
pub fn c_transform_brute(f: &PotentialField) -> Result<CTransformResult> {
    f.check_finite()?;
    let grid = *f.grid();
    let n = grid.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { cells: n, limit: BRUTE_FORCE_LIMIT });
    }
    let d = grid.dim();
    let idx: Vec<[usize; MAX_DIM]> = (0..n).map(|k| grid.unravel(k)).collect();
    let h: Vec<f64> = (0..d).map(|a| grid.spacing(a)).collect();
    let fv = f.values();

    // partial[a] = cost of axes a.. ; ranked by (partial[0], y_0, partial[1], y_1, ..)
    let better = |cand: &([f64; MAX_DIM], &[usize; MAX_DIM]), best: &([f64; MAX_DIM], &[usize; MAX_DIM])| {
        for a in 0..d {
            if cand.0[a] != best.0[a] {
                return cand.0[a] < best.0[a];
            }
            if cand.1[a] != best.1[a] {
                return cand.1[a] < best.1[a];
            }
        }
        false
    };
    let solve = |x: usize| -> (f64, usize) {
        let xi = &idx[x];
        let mut best: Option<([f64; MAX_DIM], &[usize; MAX_DIM], usize)> = None;
        for (y, yi) in idx.iter().enumerate() {
            let mut partial = [0.0; MAX_DIM];
            let mut v = -fv[y];
            for a in (0..d).rev() {
                v += half_sq(xi[a] as isize - yi[a] as isize, h[a]);
                partial[a] = v;
            }
            if best.as_ref().is_none_or(|b| better(&(partial, yi), &(b.0, b.1))) {
                best = Some((partial, yi, y));
            }
        }
        let (partial, _, y) = best.expect("grid is non-empty");
        (partial[0], y)
    };

    #[cfg(feature = "parallel")]
    let pairs: Vec<(f64, usize)> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(solve).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<(f64, usize)> = (0..n).map(solve).collect();

    let (values, argmin): (Vec<f64>, Vec<usize>) = pairs.into_iter().unzip();
    Ok(CTransformResult { fc: PotentialField::from_raw(grid, values), argmin })
}

/// `(f^c)^c`, the c-concave envelope of `f`.
pub fn double_c_transform(f: &PotentialField) -> Result<PotentialField> {
    let fc = c_transform_fast(f)?.fc;
    Ok(c_transform_fast(&fc)?.fc)
}
