//! Weighted estimators, MSE-based effective sample size, covariance
//! recovery metrics and path-length selection by jumping distance.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error};
use crate::hmc::{hmc_iteration_standard, PathLength};
use crate::linalg::{dot, norm, Matrix};
use crate::phase::{MassMatrix, PhasePoint};
use crate::special::{normal_pdf, normal_quantile};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// Scalar samples with positive, unnormalized weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedSampleSet {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            values: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        }
    }

    pub fn from_parts(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, Error> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be positive and finite"));
        }
        Ok(Self { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        Self { values, weights }
    }

    pub fn push(&mut self, value: f64, weight: f64) {
        debug_assert!(weight > 0.0 && weight.is_finite());
        self.values.push(value);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn weighted_mean(s: &WeightedSampleSet) -> Result<f64, Error> {
    if s.is_empty() {
        return Err(Error::Empty);
    }
    let total = s.total_weight();
    Ok(s.values.iter().zip(&s.weights).map(|(v, w)| v * w).sum::<f64>() / total)
}

/// Population form `Σw(v − mean)²/Σw`.
pub fn weighted_variance(s: &WeightedSampleSet) -> Result<f64, Error> {
    let mean = weighted_mean(s)?;
    let total = s.total_weight();
    Ok(s.values
        .iter()
        .zip(&s.weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / total)
}

/// Smallest value whose normalized cumulative weight reaches `q`.
pub fn weighted_quantile(s: &WeightedSampleSet, q: f64) -> Result<f64, Error> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("quantile level must lie in (0, 1)"));
    }
    if s.is_empty() {
        return Err(Error::Empty);
    }
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]));
    let total = s.total_weight();
    let target = q * total;
    let mut cum = 0.0;
    for &i in &idx {
        cum += s.weights[i];
        // relative slack absorbs rounding in the running sum
        if cum >= target * (1.0 - 4.0 * f64::EPSILON) {
            return Ok(s.values[i]);
        }
    }
    Ok(s.values[*idx.last().expect("non-empty")])
}

/// Functional of a one-dimensional distribution estimated from draws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Statistic {
    Mean,
    Variance,
    Quantile(f64),
}

impl Statistic {
    pub fn estimate(&self, s: &WeightedSampleSet) -> Result<f64, Error> {
        match *self {
            Statistic::Mean => weighted_mean(s),
            Statistic::Variance => weighted_variance(s),
            Statistic::Quantile(q) => weighted_quantile(s, q),
        }
    }

    /// Value under `N(mean, variance)`.
    pub fn gaussian_truth(&self, mean: f64, variance: f64) -> f64 {
        match *self {
            Statistic::Mean => mean,
            Statistic::Variance => variance,
            Statistic::Quantile(q) => mean + libm::sqrt(variance) * normal_quantile(q),
        }
    }

    pub fn label(&self) -> alloc::string::String {
        match *self {
            Statistic::Mean => "mean".into(),
            Statistic::Variance => "variance".into(),
            Statistic::Quantile(q) => alloc::format!("quantile_{}", q),
        }
    }
}

pub fn mse(estimates: &[f64], truth: f64) -> Result<f64, Error> {
    if estimates.is_empty() {
        return Err(Error::Empty);
    }
    Ok(estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64)
}

/// `N · MSE_iid / MSE_chain`.
pub fn ess_from_mse(mse_chain: f64, mse_iid: f64, n: usize) -> Result<f64, Error> {
    if n == 0 {
        return Err(invalid("chain length must be at least 1"));
    }
    if !(mse_chain > 0.0) || !mse_chain.is_finite() {
        return Err(Error::Degenerate("chain MSE must be positive and finite".into()));
    }
    if !(mse_iid > 0.0) || !mse_iid.is_finite() {
        return Err(Error::Degenerate("iid MSE must be positive and finite".into()));
    }
    Ok(n as f64 * (mse_iid / mse_chain))
}

/// Monte Carlo MSE of `stat` over `replications` iid samples of size `n`
/// drawn with `sampler`.
pub fn iid_mse_oracle<R, F>(
    stat: Statistic,
    truth: f64,
    n: usize,
    replications: usize,
    mut sampler: F,
    rng: &mut R,
) -> Result<f64, Error>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    if n == 0 || replications == 0 {
        return Err(invalid("sample size and replications must be positive"));
    }
    let mut estimates = Vec::with_capacity(replications);
    for _ in 0..replications {
        let s = WeightedSampleSet::unweighted((0..n).map(|_| sampler(rng)).collect());
        estimates.push(stat.estimate(&s)?);
    }
    mse(&estimates, truth)
}

/// Closed-form iid MSE on `N(·, σ²)`: `σ²/N` for the mean, `σ⁴(2N−1)/N²`
/// for the population variance, and the asymptotic `q(1−q)/(N φ(z_q)²)·σ²`
/// for a quantile.
pub fn gaussian_iid_mse(stat: Statistic, variance: f64, n: usize) -> f64 {
    let n = n as f64;
    match stat {
        Statistic::Mean => variance / n,
        Statistic::Variance => variance * variance * (2.0 * n - 1.0) / (n * n),
        Statistic::Quantile(q) => {
            let phi = normal_pdf(normal_quantile(q));
            q * (1.0 - q) / (n * phi * phi) * variance
        }
    }
}

/// Integrated autocorrelation time with Sokal's adaptive window (`c = 5`).
pub fn integrated_autocorrelation_time(x: &[f64]) -> Result<f64, Error> {
    let n = x.len();
    if n < 4 {
        return Err(invalid("need at least four values"));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Err(Error::Degenerate("constant series".into()));
    }
    let mut tau = 1.0;
    for lag in 1..n {
        let c = (0..n - lag)
            .map(|i| (x[i] - mean) * (x[i + lag] - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    Ok(tau.max(1.0))
}

/// Top eigenpair by power iteration and the angle between the top
/// eigenvector and the span of the leading true principal components.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaMetrics {
    pub top_eigenvalue: f64,
    pub top_eigenvector: Vec<f64>,
    /// Number of true components spanning the comparison subspace.
    pub ell: usize,
    pub angle: f64,
}

/// `ℓ = min{j : σⱼ² < σ₁²/2}` (1-based) for descending eigenvalues, or the
/// dimension when no eigenvalue drops below half the largest.
pub fn leading_span_size(true_eigenvalues: &[f64]) -> usize {
    let top = true_eigenvalues[0];
    true_eigenvalues
        .iter()
        .position(|v| *v < top / 2.0)
        .map(|j| j + 1)
        .unwrap_or(true_eigenvalues.len())
}

pub fn power_iteration(a: &Matrix, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>), Error> {
    let d = a.rows();
    if d == 0 || !a.is_square() {
        return Err(invalid("power iteration needs a non-empty square matrix"));
    }
    // deterministic start that is unlikely to be orthogonal to the top pair
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * libm::sqrt(i as f64 + 1.0)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let scale = (0..d).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..max_iter {
        let w = a.mul_vec(&v);
        let lambda = dot(&v, &w);
        let residual = libm::sqrt(
            w.iter()
                .zip(&v)
                .map(|(w, v)| (w - lambda * v) * (w - lambda * v))
                .sum::<f64>(),
        );
        if residual <= tol * scale {
            return Ok((lambda, v));
        }
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok((0.0, v));
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Err(Error::NoConvergence(max_iter))
}

pub fn pca_metrics(
    empirical: &Matrix,
    true_eigenvalues: &[f64],
    true_eigenvectors: &Matrix,
) -> Result<PcaMetrics, Error> {
    let d = empirical.rows();
    if true_eigenvalues.len() != d || true_eigenvectors.rows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: true_eigenvalues.len(),
        });
    }
    let (top_eigenvalue, v) = power_iteration(empirical, 1e-10, 10_000)?;
    let ell = leading_span_size(true_eigenvalues);
    Ok(PcaMetrics {
        top_eigenvalue,
        angle: angle_to_span(&v, true_eigenvectors, ell),
        top_eigenvector: v,
        ell,
    })
}

/// `arccos ‖P v‖` for unit `v` and the span of the first `ell` columns of
/// an orthonormal `basis`.
pub fn angle_to_span(v: &[f64], basis: &Matrix, ell: usize) -> f64 {
    let nv = norm(v);
    let proj_sq: f64 = (0..ell)
        .map(|j| {
            let c: f64 = (0..v.len()).map(|i| basis[(i, j)] * v[i]).sum::<f64>() / nv;
            c * c
        })
        .sum();
    libm::acos(libm::sqrt(proj_sq).min(1.0))
}

/// Normalized jumping distance `E‖θ' − θ‖² / √τ` per candidate path
/// length: one standard HMC iteration from each of `starts`, which should
/// be draws from (or a warm chain near) the target. Probing from many
/// starts rather than along one chain avoids the periodic orbits a fixed
/// `τ` can trap a single chain in.
pub fn esjd_scores<T: TargetDensity + ?Sized>(
    target: &T,
    eps: f64,
    mass: &MassMatrix,
    taus: &[f64],
    starts: &[PhasePoint],
    streams: &ChainStreams,
) -> Result<Vec<f64>, Error> {
    if taus.is_empty() || starts.is_empty() {
        return Err(invalid("need at least one path length and one probe state"));
    }
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("path lengths must be positive"));
    }
    let mut scores = Vec::with_capacity(taus.len());
    for &tau in taus {
        let path = PathLength::TimeJitter {
            tau_lo: tau,
            tau_hi: tau,
        };
        let mut s = streams.clone();
        let total: f64 = starts
            .iter()
            .map(|z| {
                let b = hmc_iteration_standard(z, &path, eps, target, mass, &mut s);
                b.next
                    .theta()
                    .iter()
                    .zip(z.theta())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        scores.push(total / starts.len() as f64 / libm::sqrt(tau));
    }
    Ok(scores)
}

/// Index of the largest score; ties go to the earliest (smallest) entry.
pub fn argmax_first(scores: &[f64]) -> Result<usize, Error> {
    if scores.is_empty() {
        return Err(Error::Empty);
    }
    if scores.iter().all(|s| !(*s > 0.0)) {
        return Err(Error::Degenerate("all jumping distances are zero".into()));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Path length maximizing the normalized jumping distance. The grid is
/// sorted first so that ties resolve to the smallest `τ`.
pub fn esjd_tune<T: TargetDensity + ?Sized>(
    target: &T,
    eps: f64,
    mass: &MassMatrix,
    taus: &[f64],
    starts: &[PhasePoint],
    streams: &ChainStreams,
) -> Result<f64, Error> {
    let mut grid = taus.to_vec();
    grid.sort_by(f64::total_cmp);
    let scores = esjd_scores(target, eps, mass, &grid, starts, streams)?;
    Ok(grid[argmax_first(&scores)?])
}
