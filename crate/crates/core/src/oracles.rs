//! Independent reference values: 1D quantile transport, the 1D
//! quantile-average barycenter, exact assignment on uniform atoms and a
//! finite-difference Neumann Laplacian.
//!
//! Nothing here touches the c-transform or the spectral solver.

use crate::barycenter::BarycenterProblem;
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

/// Largest point set accepted by [`assignment_w2`].
pub const ASSIGNMENT_LIMIT: usize = 256;

/// Default number of quantile samples for a grid of `n` cells.
pub fn default_samples(n: usize) -> usize {
    20 * n
}

/// Inverse CDF of a 1D density sampled at `q = (k + ½)/K`.
///
/// Mass is spread uniformly inside each cell, so the CDF is piecewise
/// linear between cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileProfile {
    /// `F(x_j)` at the cell edges `x_j = j·h`, `j = 0..=n`.
    pub cumulative: Vec<f64>,
    /// `F⁻¹((k + ½)/K)`, `k = 0..K`.
    pub samples: Vec<f64>,
}

impl QuantileProfile {
    pub fn new(mu: &DensityField, k: usize) -> Result<Self> {
        let grid = mu.grid();
        if grid.dim() != 1 {
            return Err(Error::NotOneDimensional(grid.dim()));
        }
        if k == 0 {
            return Err(Error::InvalidParams("quantile sample count must be positive".into()));
        }
        let n = grid.len();
        let h = grid.spacing(0);
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for &v in mu.values() {
            acc += v * h;
            cumulative.push(acc);
        }
        let total = acc;
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        cumulative[n] = 1.0;

        let mut samples = Vec::with_capacity(k);
        let mut cell = 0;
        for s in 0..k {
            let q = (s as f64 + 0.5) / k as f64;
            while cell + 1 < n && cumulative[cell + 1] < q {
                cell += 1;
            }
            let (lo, hi) = (cumulative[cell], cumulative[cell + 1]);
            let frac = if hi > lo { ((q - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
            samples.push(((cell as f64 + frac) * h).clamp(0.0, 1.0));
        }
        Ok(Self { cumulative, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `W₂(μ, ν)` in 1D as the `L²` distance between inverse CDFs.
pub fn quantile_w2_1d(mu: &DensityField, nu: &DensityField, k: usize) -> Result<f64> {
    if mu.grid() != nu.grid() {
        return Err(Error::GridMismatch);
    }
    let a = QuantileProfile::new(mu, k)?;
    let b = QuantileProfile::new(nu, k)?;
    let sq: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / k as f64).sqrt())
}

/// Weighted quantile average `Σ α_i F_{μ_i}⁻¹`, histogrammed onto the grid.
pub fn quantile_barycenter_1d(prob: &BarycenterProblem, k: usize) -> Result<DensityField> {
    let grid = *prob.grid();
    if grid.dim() != 1 {
        return Err(Error::NotOneDimensional(grid.dim()));
    }
    let profiles = prob
        .marginals()
        .iter()
        .map(|mu| QuantileProfile::new(mu, k))
        .collect::<Result<Vec<_>>>()?;
    let alpha = prob.weights().as_slice();
    let points: Vec<f64> = (0..k)
        .map(|s| profiles.iter().zip(alpha).map(|(p, a)| a * p.samples[s]).sum())
        .collect();
    histogram_1d(&grid, &points)
}

/// Density of equal-weight atoms binned into the cells that contain them.
pub fn histogram_1d(grid: &GridSpec, points: &[f64]) -> Result<DensityField> {
    if grid.dim() != 1 {
        return Err(Error::NotOneDimensional(grid.dim()));
    }
    let n = grid.len();
    let mut counts = vec![0.0; n];
    for &x in points {
        let cell = ((x * n as f64).floor().max(0.0) as usize).min(n - 1);
        counts[cell] += 1.0;
    }
    let scale = 1.0 / (points.len() as f64 * grid.cell_volume());
    DensityField::new(*grid, counts.into_iter().map(|c| c * scale).collect())
}

/// `N` equal-mass atoms at the quantiles `(k + ½)/N` of a 1D density.
pub fn uniform_atoms_1d(mu: &DensityField, n: usize) -> Result<Vec<[f64; 1]>> {
    Ok(QuantileProfile::new(mu, n)?.samples.into_iter().map(|x| [x]).collect())
}

/// `√((1/N) min_σ Σ ‖a_k − b_σ(k)‖²)` by the Hungarian method.
pub fn assignment_w2<P: AsRef<[f64]>>(a: &[P], b: &[P]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n > ASSIGNMENT_LIMIT {
        return Err(Error::TooLarge { cells: n, limit: ASSIGNMENT_LIMIT });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let d = a[0].as_ref().len();
    if a.iter().chain(b).any(|p| p.as_ref().len() != d) {
        return Err(Error::InvalidParams("points of different dimension".into()));
    }
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|p| {
            b.iter().map(move |q| p.as_ref().iter().zip(q.as_ref()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        })
        .collect();
    let assign = hungarian(&cost, n);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).sqrt())
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix;
/// returns the column assigned to each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // Shortest augmenting paths with row/column potentials, 1-based with a
    // virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// `−Δ_h φ` with the second-order stencil and reflected ghost cells.
pub fn neumann_stencil(grid: &GridSpec, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != grid.len() {
        return Err(Error::ShapeMismatch { expected: grid.len(), got: phi.len() });
    }
    let mut out = vec![0.0; phi.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let idx = grid.unravel(k);
        let mut acc = 0.0;
        for axis in 0..grid.dim() {
            let n = grid.shape()[axis];
            let s = grid.stride(axis);
            let h2 = grid.spacing(axis).powi(2);
            let left = if idx[axis] > 0 { phi[k - s] } else { phi[k] };
            let right = if idx[axis] + 1 < n { phi[k + s] } else { phi[k] };
            acc += (2.0 * phi[k] - left - right) / h2;
        }
        *o = acc;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Weights;

    #[test]
    fn point_masses_and_translation() {
        let g = GridSpec::line(8).unwrap();
        let a = DensityField::one_hot(g, 1).unwrap();
        let b = DensityField::one_hot(g, 5).unwrap();
        let k = default_samples(8);
        assert!((quantile_w2_1d(&a, &b, k).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(quantile_w2_1d(&a, &a, k).unwrap(), 0.0);

        let g = GridSpec::line(64).unwrap();
        let left = DensityField::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let right = DensityField::from_fn(g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 }).unwrap();
        let w = quantile_w2_1d(&left, &right, default_samples(64)).unwrap();
        assert!((w - 0.5).abs() < 1e-12, "{w}");
    }

    #[test]
    fn profile_is_monotone() {
        let g = GridSpec::line(32).unwrap();
        let mu = DensityField::from_fn(g, |x| 0.1 + (7.0 * x[0]).sin().powi(2)).unwrap();
        let p = QuantileProfile::new(&mu, 640).unwrap();
        assert!(p.samples.windows(2).all(|w| w[1] >= w[0]));
        assert!(p.samples.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(p.cumulative.len(), 33);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let g = GridSpec::square(4).unwrap();
        let mu = DensityField::uniform(g);
        assert!(matches!(quantile_w2_1d(&mu, &mu, 40), Err(Error::NotOneDimensional(2))));
    }

    #[test]
    fn barycenter_of_one_hots() {
        let g = GridSpec::line(16).unwrap();
        let a = DensityField::one_hot(g, 2).unwrap();
        let b = DensityField::one_hot(g, 10).unwrap();
        let prob = BarycenterProblem::new(vec![a, b], Weights::uniform(2).unwrap()).unwrap();
        let bar = quantile_barycenter_1d(&prob, 320).unwrap();
        let top = bar.values().iter().enumerate().fold(0, |b, (k, &v)| if v > bar.values()[b] { k } else { b });
        assert!((top as isize - 6).abs() <= 1);
    }

    #[test]
    fn barycenter_of_identical_marginals() {
        let g = GridSpec::line(64).unwrap();
        let mu = DensityField::from_fn(g, |x| (-(x[0] - 0.4).powi(2) / 0.01).exp()).unwrap();
        let prob = BarycenterProblem::new(vec![mu.clone(); 3], Weights::uniform(3).unwrap()).unwrap();
        let bar = quantile_barycenter_1d(&prob, 1280).unwrap();
        assert!(quantile_w2_1d(&bar, &mu, 1280).unwrap() <= 2.0 / 64.0);
    }

    #[test]
    fn assignment_examples() {
        let a = [[0.0], [0.2]];
        let b = [[0.5], [0.9]];
        let w = assignment_w2(&a, &b).unwrap();
        assert!((w - ((0.25 + 0.49) / 2.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(assignment_w2(&[[0.0], [1.0]], &[[1.0], [0.0]]).unwrap(), 0.0);
        assert!(matches!(assignment_w2(&[[0.0]], &[[0.0], [1.0]]), Err(Error::SizeMismatch(1, 2))));
        let big = vec![[0.0]; 257];
        assert!(matches!(assignment_w2(&big, &big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn hungarian_beats_every_permutation() {
        let a = [[0.1, 0.9], [0.4, 0.2], [0.8, 0.7], [0.3, 0.5]];
        let b = [[0.6, 0.1], [0.2, 0.8], [0.9, 0.9], [0.5, 0.4]];
        let w = assignment_w2(&a, &b).unwrap();
        let mut best = f64::INFINITY;
        let mut perm = [0, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            let s: f64 = (0..4)
                .map(|i| (a[i][0] - b[p[i]][0]).powi(2) + (a[i][1] - b[p[i]][1]).powi(2))
                .sum();
            best = best.min(s);
        });
        assert!((w - (best / 4.0).sqrt()).abs() < 1e-12);
    }

    fn permute(p: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn stencil_kills_constants() {
        let g = GridSpec::new(&[5, 4, 3]).unwrap();
        let lap = neumann_stencil(&g, &vec![2.5; g.len()]).unwrap();
        assert!(lap.iter().all(|&v| v == 0.0));
    }
}
