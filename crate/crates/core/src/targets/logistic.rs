use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{sigmoid, softplus, TargetDensity};
use crate::error::TargetError;
use crate::linalg::Matrix;

/// Origin of a design-matrix column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    /// Standardized raw predictor.
    Raw(usize),
    /// Product of two standardized raw predictors, `i < j`.
    Interaction(usize, usize),
    Intercept,
}

/// Design matrix with all two-way interactions and an intercept.
///
/// Column order: the `r` standardized raw predictors, then the products
/// `(i, j)` for `i < j` in lexicographic order, then the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegressionData {
    design: Matrix,
    outcomes: Vec<f64>,
    columns: Vec<ColumnKind>,
}

impl LogisticRegressionData {
    /// `raw` holds one row per observation with `r` predictor values.
    /// Raw columns are centered and scaled to unit population variance
    /// before interactions are formed.
    pub fn from_raw(raw: &[Vec<f64>], outcomes: &[f64]) -> Result<Self, TargetError> {
        let n = raw.len();
        if n == 0 {
            return Err(TargetError::InvalidData("no observations".into()));
        }
        if outcomes.len() != n {
            return Err(TargetError::InvalidData(format!(
                "{} predictor rows but {} outcomes",
                n,
                outcomes.len()
            )));
        }
        if let Some(i) = outcomes.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(TargetError::InvalidData(format!(
                "outcome in row {} is {}, expected 0 or 1",
                i, outcomes[i]
            )));
        }
        let r = raw[0].len();
        if let Some(i) = raw.iter().position(|row| row.len() != r) {
            return Err(TargetError::InvalidData(format!(
                "row {} has {} predictors, expected {}",
                i,
                raw[i].len(),
                r
            )));
        }

        let mut standardized = vec![vec![0.0; r]; n];
        for j in 0..r {
            let mean = raw.iter().map(|row| row[j]).sum::<f64>() / n as f64;
            let var = raw.iter().map(|row| (row[j] - mean) * (row[j] - mean)).sum::<f64>() / n as f64;
            if !(var > 0.0) || !var.is_finite() {
                return Err(TargetError::InvalidData(format!(
                    "predictor column {} is constant or non-finite",
                    j
                )));
            }
            let sd = libm::sqrt(var);
            for (dst, row) in standardized.iter_mut().zip(raw) {
                dst[j] = (row[j] - mean) / sd;
            }
        }

        let mut columns: Vec<ColumnKind> = (0..r).map(ColumnKind::Raw).collect();
        for i in 0..r {
            for j in (i + 1)..r {
                columns.push(ColumnKind::Interaction(i, j));
            }
        }
        columns.push(ColumnKind::Intercept);

        let q = columns.len();
        let mut data = Vec::with_capacity(n * q);
        for row in &standardized {
            for col in &columns {
                data.push(match *col {
                    ColumnKind::Raw(i) => row[i],
                    ColumnKind::Interaction(i, j) => row[i] * row[j],
                    ColumnKind::Intercept => 1.0,
                });
            }
        }
        let design = Matrix::from_row_major(n, q, data)
            .map_err(|_| TargetError::InvalidData("design matrix shape".into()))?;
        Ok(Self {
            design,
            outcomes: outcomes.to_vec(),
            columns,
        })
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn columns(&self) -> &[ColumnKind] {
        &self.columns
    }

    pub fn n_observations(&self) -> usize {
        self.design.rows()
    }

    /// Number of regression coefficients `q = r + r(r−1)/2 + 1`.
    pub fn n_coefficients(&self) -> usize {
        self.design.cols()
    }
}

/// Prior on the coefficient scale σ.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum SigmaPrior {
    #[default]
    Flat,
    Exponential { rate: f64 },
}

/// Hierarchical logistic regression over `(log σ, β)` with `β ~ N(0, σ² I)`.
///
/// `log p = Σᵢ [yᵢηᵢ − log(1 + e^ηᵢ)] − ‖β‖²/(2σ²) − q·log σ + log p(σ) + log σ`
/// with `η = Xβ`; the trailing `log σ` is the Jacobian of `σ = e^s`.
#[derive(Clone, Debug)]
pub struct LogisticModel {
    data: LogisticRegressionData,
    prior: SigmaPrior,
}

impl LogisticModel {
    pub fn new(data: LogisticRegressionData, prior: SigmaPrior) -> Result<Self, TargetError> {
        if let SigmaPrior::Exponential { rate } = prior {
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(TargetError::InvalidData("sigma prior rate must be positive".into()));
            }
        }
        Ok(Self { data, prior })
    }

    pub fn data(&self) -> &LogisticRegressionData {
        &self.data
    }

    pub fn prior(&self) -> SigmaPrior {
        self.prior
    }

    /// Log-likelihood `Σᵢ [yᵢηᵢ − log(1 + e^ηᵢ)]` at coefficients `beta`.
    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let eta = self.data.design.mul_vec(beta);
        eta.iter()
            .zip(&self.data.outcomes)
            .map(|(e, y)| y * e - softplus(*e))
            .sum()
    }
}

impl TargetDensity for LogisticModel {
    fn dim(&self) -> usize {
        1 + self.data.n_coefficients()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        let q = self.data.n_coefficients();
        let log_sigma = theta[0];
        let beta = &theta[1..];
        let inv_var = libm::exp(-2.0 * log_sigma);
        if !inv_var.is_finite() {
            return Err(TargetError::NonFinite);
        }

        let eta = self.data.design.mul_vec(beta);
        let mut lp = 0.0;
        let mut resid = vec![0.0; eta.len()];
        for ((r, e), y) in resid.iter_mut().zip(&eta).zip(&self.data.outcomes) {
            lp += y * e - softplus(*e);
            *r = y - sigmoid(*e);
        }
        let xt_resid = self.data.design.tr_mul_vec(&resid);

        let beta_sq: f64 = beta.iter().map(|b| b * b).sum();
        lp += -0.5 * beta_sq * inv_var - (q as f64) * log_sigma + log_sigma;
        let mut g_log_sigma = beta_sq * inv_var - q as f64 + 1.0;
        if let SigmaPrior::Exponential { rate } = self.prior {
            let sigma = libm::exp(log_sigma);
            lp -= rate * sigma;
            g_log_sigma -= rate * sigma;
        }

        grad[0] = g_log_sigma;
        for ((g, xr), b) in grad[1..].iter_mut().zip(&xt_resid).zip(beta) {
            *g = xr - b * inv_var;
        }
        debug_assert_eq!(grad.len(), 1 + q);
        Ok(lp)
    }
}
