use alloc::vec::Vec;

use super::TargetDensity;
use crate::error::TargetError;

/// Positive closing values and their log-return increments.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsSeries {
    closes: Vec<f64>,
    returns: Vec<f64>,
}

impl ReturnsSeries {
    pub fn new(closes: Vec<f64>) -> Result<Self, TargetError> {
        if closes.len() < 2 {
            return Err(TargetError::InvalidData(
                "need at least two closing values for one return".into(),
            ));
        }
        if let Some(i) = closes.iter().position(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(TargetError::InvalidData(alloc::format!(
                "closing value {} at row {} is not a positive finite number",
                closes[i],
                i
            )));
        }
        let returns: Vec<f64> = closes
            .windows(2)
            .map(|w| libm::log(w[1] / w[0]))
            .collect();
        Ok(Self { closes, returns })
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// Hyperparameters: `s₀ ~ Exp(mean = s0_mean)`, `τ ~ Gamma(shape, rate)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvPriors {
    pub s0_mean: f64,
    pub tau_shape: f64,
    pub tau_rate: f64,
}

impl Default for SvPriors {
    fn default() -> Self {
        Self {
            s0_mean: 0.1,
            tau_shape: 0.5,
            tau_rate: 0.5,
        }
    }
}

/// Stochastic volatility with the random-walk precision τ integrated out.
///
/// Parameters are `xᵢ = log sᵢ`, one per return. With `rᵢ` the log-returns
/// and `eᵢ = 100(xᵢ − xᵢ₋₁)`, `m = n − 1`, `S = Σ eᵢ²`:
///
/// `log p(x) = Σᵢ (−xᵢ − rᵢ² e^{−2xᵢ}/2) − (a + m/2)·log(b + S/2) − λe^{x₀} + x₀`
///
/// where `λ = 1/s0_mean`, the last two terms are the exponential prior on
/// the first volatility and its log-Jacobian.
#[derive(Clone, Debug)]
pub struct StochasticVolatility {
    returns_sq: Vec<f64>,
    priors: SvPriors,
}

const RW_SCALE: f64 = 100.0;

pub fn make_sv_model(
    series: &ReturnsSeries,
    priors: SvPriors,
) -> Result<StochasticVolatility, TargetError> {
    StochasticVolatility::new(series, priors)
}

impl StochasticVolatility {
    pub fn new(series: &ReturnsSeries, priors: SvPriors) -> Result<Self, TargetError> {
        if series.is_empty() {
            return Err(TargetError::InvalidData("empty returns series".into()));
        }
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(priors.s0_mean) || !ok(priors.tau_shape) || !ok(priors.tau_rate) {
            return Err(TargetError::InvalidData(
                "stochastic volatility hyperparameters must be positive".into(),
            ));
        }
        Ok(Self {
            returns_sq: series.returns().iter().map(|r| r * r).collect(),
            priors,
        })
    }

    pub fn priors(&self) -> SvPriors {
        self.priors
    }
}

impl TargetDensity for StochasticVolatility {
    fn dim(&self) -> usize {
        self.returns_sq.len()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        let n = x.len();
        let mut lp = 0.0;
        for ((g, &xi), &r2) in grad.iter_mut().zip(x).zip(&self.returns_sq) {
            let w = r2 * libm::exp(-2.0 * xi);
            lp += -xi - 0.5 * w;
            *g = -1.0 + w;
        }

        let m = (n - 1) as f64;
        let sum_sq: f64 = x
            .windows(2)
            .map(|w| {
                let e = RW_SCALE * (w[1] - w[0]);
                e * e
            })
            .sum();
        let shape = self.priors.tau_shape + 0.5 * m;
        let base = self.priors.tau_rate + 0.5 * sum_sq;
        lp -= shape * libm::log(base);
        let c = shape / base * RW_SCALE * RW_SCALE;
        for i in 0..n {
            let back = if i >= 1 { x[i] - x[i - 1] } else { 0.0 };
            let fwd = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            grad[i] -= c * (back - fwd);
        }

        let lambda = 1.0 / self.priors.s0_mean;
        let s0 = libm::exp(x[0]);
        lp += -lambda * s0 + x[0];
        grad[0] += -lambda * s0 + 1.0;

        if !lp.is_finite() {
            return Err(TargetError::NonFinite);
        }
        Ok(lp)
    }
}
