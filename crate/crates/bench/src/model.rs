//! Concrete targets behind one type, built from configuration.

use rehmc_core::linalg::Matrix;
use rehmc_core::targets::{
    make_gaussian, make_sv_model, Gaussian, GaussianSpec, LogGamma, LogisticModel, LogisticRegressionData,
    ReturnsSeries, SigmaPrior, StochasticVolatility, SvPriors,
};
use rehmc_core::{TargetDensity, TargetError};

use crate::config::{SigmaPriorConfig, TargetConfig};
use crate::error::{BenchError, Result};
use crate::io;

#[derive(Clone, Debug)]
pub enum Model {
    Gaussian(Gaussian),
    Logistic(LogisticModel),
    Sv(StochasticVolatility),
    LogGamma(LogGamma),
}

impl Model {
    pub fn build(config: &TargetConfig) -> Result<Self> {
        Ok(match config {
            TargetConfig::GaussianIid { dim } => gaussian(GaussianSpec::IidStandard { dim: *dim })?,
            TargetConfig::GaussianDiagonal { variances } => gaussian(GaussianSpec::Diagonal {
                variances: variances.clone(),
            })?,
            TargetConfig::GaussianScaled { dim } => gaussian(GaussianSpec::Diagonal {
                variances: (1..=*dim).map(|i| (i * i) as f64).collect(),
            })?,
            TargetConfig::GaussianDense { covariance } => gaussian(GaussianSpec::Dense {
                covariance: Matrix::from_rows(covariance)?,
            })?,
            TargetConfig::GaussianEquicorrelated { dim, rho } => {
                let rows: Vec<Vec<f64>> = (0..*dim)
                    .map(|i| (0..*dim).map(|j| if i == j { 1.0 } else { *rho }).collect())
                    .collect();
                gaussian(GaussianSpec::Dense {
                    covariance: Matrix::from_rows(&rows)?,
                })?
            }
            TargetConfig::Logistic { data, sigma_prior } => {
                let (raw, y) = io::read_logistic_csv(data)?;
                let d = LogisticRegressionData::from_raw(&raw, &y).map_err(|e| data_error(data, e))?;
                let prior = match *sigma_prior {
                    SigmaPriorConfig::Flat => SigmaPrior::Flat,
                    SigmaPriorConfig::Exponential { rate } => SigmaPrior::Exponential { rate },
                };
                Model::Logistic(LogisticModel::new(d, prior).map_err(|e| data_error(data, e))?)
            }
            TargetConfig::StochasticVolatility {
                data,
                s0_mean,
                tau_shape,
                tau_rate,
            } => {
                let series = ReturnsSeries::new(io::read_closes_csv(data)?).map_err(|e| data_error(data, e))?;
                let priors = SvPriors {
                    s0_mean: *s0_mean,
                    tau_shape: *tau_shape,
                    tau_rate: *tau_rate,
                };
                Model::Sv(make_sv_model(&series, priors).map_err(|e| data_error(data, e))?)
            }
            TargetConfig::LogGamma { shape, rate } => Model::LogGamma(LogGamma::new(*shape, *rate)?),
        })
    }

    pub fn as_gaussian(&self) -> Option<&Gaussian> {
        match self {
            Model::Gaussian(g) => Some(g),
            _ => None,
        }
    }
}

fn gaussian(spec: GaussianSpec) -> Result<Model> {
    Ok(Model::Gaussian(make_gaussian(spec)?))
}

fn data_error(path: &std::path::Path, e: TargetError) -> BenchError {
    BenchError::Data {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl TargetDensity for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Gaussian(t) => t.dim(),
            Model::Logistic(t) => t.dim(),
            Model::Sv(t) => t.dim(),
            Model::LogGamma(t) => t.dim(),
        }
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        match self {
            Model::Gaussian(t) => t.log_density_and_grad(theta, grad),
            Model::Logistic(t) => t.log_density_and_grad(theta, grad),
            Model::Sv(t) => t.log_density_and_grad(theta, grad),
            Model::LogGamma(t) => t.log_density_and_grad(theta, grad),
        }
    }
}
