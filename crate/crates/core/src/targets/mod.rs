//! Target densities: the interface samplers consume and the built-in model
//! families (Gaussian, hierarchical logistic regression, stochastic
//! volatility, log-Gamma).
//!
//! All log-densities drop parameter-independent additive constants. Every
//! quantity downstream (acceptance ratios, slice levels, weights) depends on
//! differences only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::TargetError;

mod gaussian;
mod log_gamma;
mod logistic;
mod sv;

pub use gaussian::{make_gaussian, Gaussian, GaussianSpec};
pub use log_gamma::LogGamma;
pub use logistic::{ColumnKind, LogisticModel, LogisticRegressionData, SigmaPrior};
pub use sv::{make_sv_model, ReturnsSeries, StochasticVolatility, SvPriors};

/// A differentiable unnormalized log-density on `R^dim`.
///
/// Implementations must be reentrant: samplers evaluate the same target
/// from many chains at once.
pub trait TargetDensity {
    fn dim(&self) -> usize;

    /// Writes `∇ log π(theta)` into `grad` and returns `log π(theta)`.
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError>;

    fn log_density(&self, theta: &[f64]) -> Result<f64, TargetError> {
        let mut grad = vec![0.0; self.dim()];
        self.log_density_and_grad(theta, &mut grad)
    }

    fn grad_log_density(&self, theta: &[f64]) -> Result<Vec<f64>, TargetError> {
        let mut grad = vec![0.0; self.dim()];
        self.log_density_and_grad(theta, &mut grad)?;
        Ok(grad)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        (**self).log_density_and_grad(theta, grad)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for alloc::boxed::Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        (**self).log_density_and_grad(theta, grad)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for alloc::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        (**self).log_density_and_grad(theta, grad)
    }
}

/// Evaluates a target and rejects NaN/inf outputs.
pub(crate) fn evaluate_checked<T: TargetDensity + ?Sized>(
    target: &T,
    theta: &[f64],
    grad: &mut [f64],
) -> Result<f64, TargetError> {
    if let Some(index) = theta.iter().position(|v| !v.is_finite()) {
        return Err(TargetError::OutOfSupport { index });
    }
    let lp = target.log_density_and_grad(theta, grad)?;
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(TargetError::NonFinite);
    }
    Ok(lp)
}

/// `log(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
