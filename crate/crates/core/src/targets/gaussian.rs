use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::TargetDensity;
use crate::error::{invalid, Error, TargetError};
use crate::linalg::{symmetric_eigen, Cholesky, Matrix};
use crate::special::normal_quantile;

/// Zero-mean Gaussian test family.
#[derive(Clone, Debug, PartialEq)]
pub enum GaussianSpec {
    IidStandard { dim: usize },
    Diagonal { variances: Vec<f64> },
    Dense { covariance: Matrix },
}

impl GaussianSpec {
    pub fn dim(&self) -> usize {
        match self {
            GaussianSpec::IidStandard { dim } => *dim,
            GaussianSpec::Diagonal { variances } => variances.len(),
            GaussianSpec::Dense { covariance } => covariance.rows(),
        }
    }
}

#[derive(Clone, Debug)]
enum Precision {
    Identity,
    Diagonal(Vec<f64>),
    Dense { precision: Matrix, chol: Cholesky },
}

/// `N(0, Σ)` with analytic truth accessors.
#[derive(Clone, Debug)]
pub struct Gaussian {
    spec: GaussianSpec,
    precision: Precision,
    variances: Vec<f64>,
}

pub fn make_gaussian(spec: GaussianSpec) -> Result<Gaussian, Error> {
    Gaussian::new(spec)
}

impl Gaussian {
    pub fn new(spec: GaussianSpec) -> Result<Self, Error> {
        let (precision, variances) = match &spec {
            GaussianSpec::IidStandard { dim } => {
                if *dim == 0 {
                    return Err(invalid("gaussian dimension must be positive"));
                }
                (Precision::Identity, vec![1.0; *dim])
            }
            GaussianSpec::Diagonal { variances } => {
                if variances.is_empty() {
                    return Err(invalid("gaussian dimension must be positive"));
                }
                if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(invalid("diagonal variances must be finite and strictly positive"));
                }
                (
                    Precision::Diagonal(variances.iter().map(|v| 1.0 / v).collect()),
                    variances.clone(),
                )
            }
            GaussianSpec::Dense { covariance } => {
                if covariance.rows() == 0 {
                    return Err(invalid("gaussian dimension must be positive"));
                }
                let chol = Cholesky::new(covariance)?;
                (
                    Precision::Dense {
                        precision: chol.inverse(),
                        chol,
                    },
                    covariance.diagonal(),
                )
            }
        };
        Ok(Self {
            spec,
            precision,
            variances,
        })
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }

    pub fn mean(&self) -> Vec<f64> {
        vec![0.0; self.variances.len()]
    }

    /// Marginal variance of each coordinate.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn covariance(&self) -> Matrix {
        match &self.spec {
            GaussianSpec::IidStandard { dim } => Matrix::identity(*dim),
            GaussianSpec::Diagonal { variances } => Matrix::from_diagonal(variances),
            GaussianSpec::Dense { covariance } => covariance.clone(),
        }
    }

    /// Marginal quantile of coordinate `index` at level `q`.
    pub fn quantile(&self, index: usize, q: f64) -> f64 {
        libm::sqrt(self.variances[index]) * normal_quantile(q)
    }

    /// Eigenvalues of Σ in descending order with matching unit eigenvectors
    /// as matrix columns.
    pub fn eigen(&self) -> (Vec<f64>, Matrix) {
        match &self.spec {
            GaussianSpec::Dense { covariance } => symmetric_eigen(covariance),
            _ => {
                let n = self.variances.len();
                let mut order: Vec<usize> = (0..n).collect();
                // stable sort keeps ties in coordinate order
                order.sort_by(|&i, &j| self.variances[j].total_cmp(&self.variances[i]));
                let mut vectors = Matrix::zeros(n, n);
                for (col, &i) in order.iter().enumerate() {
                    vectors[(i, col)] = 1.0;
                }
                (order.iter().map(|&i| self.variances[i]).collect(), vectors)
            }
        }
    }

    /// Exact draw from the target.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.variances.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        match &self.precision {
            Precision::Identity => z,
            Precision::Diagonal(_) => z
                .iter()
                .zip(&self.variances)
                .map(|(z, v)| z * libm::sqrt(*v))
                .collect(),
            Precision::Dense { chol, .. } => chol.lower_mul(&z),
        }
    }
}

impl TargetDensity for Gaussian {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn log_density_and_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64, TargetError> {
        match &self.precision {
            Precision::Identity => {
                for (g, t) in grad.iter_mut().zip(theta) {
                    *g = -t;
                }
            }
            Precision::Diagonal(p) => {
                for ((g, t), p) in grad.iter_mut().zip(theta).zip(p) {
                    *g = -t * p;
                }
            }
            Precision::Dense { precision, .. } => {
                precision.mul_vec_into(theta, grad);
                grad.iter_mut().for_each(|g| *g = -*g);
            }
        }
        Ok(0.5 * crate::linalg::dot(theta, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn iid_mode_is_zero() {
        let g = make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap();
        let mut grad = [1.0];
        assert_eq!(g.log_density_and_grad(&[0.0], &mut grad).unwrap(), 0.0);
        assert_eq!(grad[0], 0.0);
    }

    #[test]
    fn diagonal_hand_values() {
        let g = make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 4.0],
        })
        .unwrap();
        let mut grad = [0.0; 2];
        let lp = g.log_density_and_grad(&[2.0, 2.0], &mut grad).unwrap();
        assert_eq!(lp, -2.5);
        assert_eq!(grad, [-2.0, -0.5]);
    }

    #[test]
    fn dense_gradient_matches_explicit_inverse() {
        let cov = Matrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let g = make_gaussian(GaussianSpec::Dense { covariance: cov }).unwrap();
        // [[a,b],[b,d]]^-1 = [[d,-b],[-b,a]] / (ad - b^2)
        let det = 1.0 - 0.81;
        let inv = [[1.0 / det, -0.9 / det], [-0.9 / det, 1.0 / det]];
        let expected = [-(inv[0][0] + inv[0][1]), -(inv[1][0] + inv[1][1])];
        let grad = g.grad_log_density(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(grad[0], expected[0], epsilon = 1e-12);
        assert_relative_eq!(grad[1], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let cov = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            make_gaussian(GaussianSpec::Dense { covariance: cov }),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 0.0]
        })
        .is_err());
        assert!(make_gaussian(GaussianSpec::IidStandard { dim: 0 }).is_err());
    }

    #[test]
    fn quantile_truth() {
        let g = make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 9.0],
        })
        .unwrap();
        assert_eq!(g.quantile(1, 0.5), 0.0);
        assert_relative_eq!(g.quantile(0, 0.975), 1.959964, epsilon = 1e-6);
        assert_relative_eq!(g.quantile(1, 0.975), 3.0 * 1.959964, epsilon = 1e-5);
    }

    #[test]
    fn eigen_sorted_descending() {
        let g = make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 4.0, 2.0],
        })
        .unwrap();
        let (vals, vecs) = g.eigen();
        assert_eq!(vals, vec![4.0, 2.0, 1.0]);
        assert_eq!(vecs[(1, 0)], 1.0);
        assert_eq!(vecs[(2, 1)], 1.0);
    }
}
