use super::TargetDensity;
use crate::error::{invalid, Error, TargetError};

/// Law of `log g` for `g ~ Gamma(shape, rate)`: a one-dimensional,
/// left-skewed density on the real line, `log p(x) = shape·x − rate·eˣ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogGamma {
    shape: f64,
    rate: f64,
}

impl LogGamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self, Error> {
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(invalid("log-gamma shape and rate must be positive"));
        }
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl TargetDensity for LogGamma {
    fn dim(&self) -> usize {
        1
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        let x = theta[0];
        let ex = libm::exp(x);
        grad[0] = self.shape - self.rate * ex;
        Ok(self.shape * x - self.rate * ex)
    }
}
