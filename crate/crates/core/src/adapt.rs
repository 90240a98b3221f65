//! Warmup: dual-averaging step size, weighted covariance estimation and the
//! shrunk mass matrix, and the three-phase tuning schedule.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error};
use crate::integrator::leapfrog_step;
use crate::kernel::KernelSpec;
use crate::linalg::{Cholesky, Matrix};
use crate::phase::{MassMatrix, PhasePoint};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// Dual-averaging constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualAveragingConfig {
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl Default for DualAveragingConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            delta: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualAveraging {
    config: DualAveragingConfig,
    t: usize,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    mu: f64,
    clamped: usize,
}

impl DualAveraging {
    pub fn new(eps0: f64, delta: f64) -> Result<Self, Error> {
        Self::with_config(
            eps0,
            DualAveragingConfig {
                delta,
                ..DualAveragingConfig::default()
            },
        )
    }

    pub fn with_config(eps0: f64, config: DualAveragingConfig) -> Result<Self, Error> {
        if !(eps0 > 0.0) || !eps0.is_finite() {
            return Err(invalid("initial step size must be positive and finite"));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return Err(invalid("target acceptance must lie in (0, 1)"));
        }
        if !(config.gamma > 0.0) || !(config.t0 >= 0.0) || !(config.kappa > 0.0) {
            return Err(invalid("dual-averaging constants must be positive"));
        }
        let log_eps = libm::log(eps0);
        Ok(Self {
            config,
            t: 0,
            h_bar: 0.0,
            log_eps,
            log_eps_bar: 0.0,
            mu: libm::log(10.0 * eps0),
            clamped: 0,
        })
    }

    /// Feeds one acceptance statistic. Values outside `[0, 1]` (or NaN) are
    /// clamped and counted; returns whether this one was.
    pub fn update(&mut self, accept_stat: f64) -> bool {
        let clamped = !(0.0..=1.0).contains(&accept_stat);
        let a = if accept_stat.is_nan() {
            0.0
        } else {
            accept_stat.clamp(0.0, 1.0)
        };
        if clamped {
            self.clamped += 1;
        }
        let c = &self.config;
        self.t += 1;
        let t = self.t as f64;
        let eta = 1.0 / (t + c.t0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (c.delta - a);
        self.log_eps = self.mu - libm::sqrt(t) / c.gamma * self.h_bar;
        let w = libm::pow(t, -c.kappa);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
        clamped
    }

    /// Step size to use for the next iteration.
    pub fn step_size(&self) -> f64 {
        libm::exp(self.log_eps)
    }

    /// Averaged iterate `exp(log ε̄)`, the value reported after warmup.
    pub fn final_step_size(&self) -> f64 {
        if self.t == 0 {
            self.step_size()
        } else {
            libm::exp(self.log_eps_bar)
        }
    }

    pub fn iterations(&self) -> usize {
        self.t
    }

    pub fn h_bar(&self) -> f64 {
        self.h_bar
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn log_step_size(&self) -> f64 {
        self.log_eps
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMode {
    Diagonal,
    Dense,
}

/// Weighted single-pass mean and centered sum of products.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceAccumulator {
    mode: CovarianceMode,
    weight: f64,
    mean: Vec<f64>,
    /// `d × d` in dense mode, length `d` in diagonal mode.
    m2: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize, mode: CovarianceMode) -> Self {
        let len = match mode {
            CovarianceMode::Dense => dim * dim,
            CovarianceMode::Diagonal => dim,
        };
        Self {
            mode,
            weight: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; len],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mode(&self) -> CovarianceMode {
        self.mode
    }

    pub fn total_weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64], weight: f64) -> Result<(), Error> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(invalid("draw weights must be positive and finite"));
        }
        let new_weight = self.weight + weight;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        // w·(W/W') δδᵀ is the exact increment and stays symmetric
        let scale = weight * self.weight / new_weight;
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += weight / new_weight * dl;
        }
        match self.mode {
            CovarianceMode::Dense => {
                for i in 0..d {
                    for j in 0..d {
                        self.m2[i * d + j] += scale * (delta[i] * delta[j]);
                    }
                }
            }
            CovarianceMode::Diagonal => {
                for (m2, dl) in self.m2.iter_mut().zip(&delta) {
                    *m2 += scale * (dl * dl);
                }
            }
        }
        self.weight = new_weight;
        Ok(())
    }

    /// Population covariance `M2 / W`; diagonal mode yields a diagonal
    /// matrix. Zero before any data.
    pub fn covariance(&self) -> Matrix {
        let d = self.dim();
        let w = if self.weight > 0.0 { self.weight } else { 1.0 };
        match self.mode {
            CovarianceMode::Dense => {
                Matrix::from_row_major(d, d, self.m2.iter().map(|v| v / w).collect())
                    .expect("square storage")
            }
            CovarianceMode::Diagonal => {
                Matrix::from_diagonal(&self.m2.iter().map(|v| v / w).collect::<Vec<_>>())
            }
        }
    }
}

pub const SHRINKAGE_PRIOR: f64 = 5.0;
pub const SHRINKAGE_RIDGE: f64 = 1e-3;

/// `Σ̂ = N/(5+N)·Σ_emp + 5/(5+N)·10⁻³·I`.
pub fn finalize_shrinkage(empirical: &Matrix, n_adap: usize) -> Result<Matrix, Error> {
    if !empirical.is_square() {
        return Err(invalid("covariance must be square"));
    }
    let n = n_adap as f64;
    let a = n / (SHRINKAGE_PRIOR + n);
    let b = SHRINKAGE_PRIOR / (SHRINKAGE_PRIOR + n) * SHRINKAGE_RIDGE;
    let d = empirical.rows();
    let mut out = empirical.scale(a);
    for i in 0..d {
        out[(i, i)] += b;
    }
    Cholesky::new(&out)?;
    Ok(out)
}

/// Mass matrix `M = Σ̂⁻¹` from a shrunk covariance.
pub fn mass_from_covariance(sigma: &Matrix, mode: CovarianceMode) -> Result<MassMatrix, Error> {
    match mode {
        CovarianceMode::Dense => MassMatrix::from_inverse(sigma.clone()),
        CovarianceMode::Diagonal => MassMatrix::from_inverse_diagonal(&sigma.diagonal()),
    }
}

/// Doubles or halves `ε` from 1 until the one-step acceptance ratio
/// crosses 1/2.
pub fn find_reasonable_epsilon<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    target: &T,
    mass: &MassMatrix,
    streams: &mut ChainStreams,
) -> f64 {
    let p = mass.draw_momentum(&mut streams.init);
    let z = state.clone().with_momentum(p, mass);
    let h0 = z.joint_log_density();
    let log_ratio = |eps: f64| match leapfrog_step(&z, eps, target, mass) {
        Ok(z1) => {
            let r = z1.joint_log_density() - h0;
            if r.is_nan() {
                f64::NEG_INFINITY
            } else {
                r
            }
        }
        Err(_) => f64::NEG_INFINITY,
    };
    let ln_half = -core::f64::consts::LN_2;
    let mut eps = 1.0;
    let mut r = log_ratio(eps);
    let dir = if r > ln_half { 1.0 } else { -1.0 };
    for _ in 0..100 {
        if !(dir * r > dir * ln_half) {
            break;
        }
        eps *= libm::pow(2.0, dir);
        r = log_ratio(eps);
    }
    // a downhill search stops at the first ε that crossed; an uphill one
    // overshoots by a factor 2
    if dir > 0.0 {
        eps / 2.0
    } else {
        eps
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningOptions {
    pub delta: f64,
    pub initial_da: usize,
    pub final_da: usize,
    pub mode: CovarianceMode,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            delta: 0.7,
            initial_da: 50,
            final_da: 75,
            mode: CovarianceMode::Dense,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TunedSampler {
    pub step_size: f64,
    pub mass: MassMatrix,
    pub covariance: Matrix,
    pub state: PhasePoint,
    pub warmup_iterations: usize,
    pub grad_evals: usize,
}

/// Three-phase warmup: `initial_da` dual-averaging iterations with the
/// identity mass, `n_adap` iterations at the averaged step size feeding the
/// covariance accumulator, then `final_da` dual-averaging iterations under
/// `M⁻¹ = Σ̂`. With `use_recycling`, phase two also feeds every recycled
/// draw with its weight; all other phases ignore recycling.
#[allow(clippy::too_many_arguments)]
pub fn tuning_schedule<T: TargetDensity + ?Sized>(
    target: &T,
    theta0: Vec<f64>,
    spec: &KernelSpec,
    n_adap: usize,
    use_recycling: bool,
    options: &TuningOptions,
    streams: &mut ChainStreams,
) -> Result<TunedSampler, Error> {
    spec.validate()?;
    let d = target.dim();
    let plain = spec.without_recycling();
    let identity = MassMatrix::identity(d);
    let mut state = PhasePoint::new(theta0, vec![0.0; d], target, &identity)?;
    let mut iteration = 0;
    let mut grad_evals = 0;

    let eps0 = find_reasonable_epsilon(&state, target, &identity, streams);
    let mut da = DualAveraging::new(eps0, options.delta)?;
    for _ in 0..options.initial_da {
        let b = plain.transition(&state, da.step_size(), target, &identity, streams, iteration);
        da.update(b.diagnostics.accept_stat);
        grad_evals += b.diagnostics.grad_evals;
        state = b.next;
        iteration += 1;
    }

    let eps = da.final_step_size();
    let phase2 = if use_recycling { *spec } else { plain };
    let mut acc = CovarianceAccumulator::new(d, options.mode);
    for _ in 0..n_adap {
        let b = phase2.transition(&state, eps, target, &identity, streams, iteration);
        acc.update(b.next.theta(), 1.0)?;
        if use_recycling {
            for r in &b.recycled {
                acc.update(&r.theta, r.weight)?;
            }
        }
        grad_evals += b.diagnostics.grad_evals;
        state = b.next;
        iteration += 1;
    }

    let covariance = finalize_shrinkage(&acc.covariance(), n_adap)?;
    let mass = mass_from_covariance(&covariance, options.mode)?;
    let mut da = DualAveraging::new(eps, options.delta)?;
    for _ in 0..options.final_da {
        let b = plain.transition(&state, da.step_size(), target, &mass, streams, iteration);
        da.update(b.diagnostics.accept_stat);
        grad_evals += b.diagnostics.grad_evals;
        state = b.next;
        iteration += 1;
    }
    let step_size = if options.final_da > 0 {
        da.final_step_size()
    } else {
        eps
    };
    Ok(TunedSampler {
        step_size,
        mass,
        covariance,
        state,
        warmup_iterations: iteration,
        grad_evals,
    })
}

/// Plain dual-averaging warmup at a fixed mass matrix. Returns the averaged
/// step size and the final state.
pub fn adapt_step_size<T: TargetDensity + ?Sized>(
    target: &T,
    theta0: Vec<f64>,
    spec: &KernelSpec,
    mass: &MassMatrix,
    iterations: usize,
    delta: f64,
    streams: &mut ChainStreams,
) -> Result<(f64, PhasePoint), Error> {
    spec.validate()?;
    let plain = spec.without_recycling();
    let d = target.dim();
    let mut state = PhasePoint::new(theta0, vec![0.0; d], target, mass)?;
    let eps0 = find_reasonable_epsilon(&state, target, mass, streams);
    let mut da = DualAveraging::new(eps0, delta)?;
    for i in 0..iterations {
        let b = plain.transition(&state, da.step_size(), target, mass, streams, i);
        da.update(b.diagnostics.accept_stat);
        state = b.next;
    }
    Ok((da.final_step_size(), state))
}
