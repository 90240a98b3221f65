//! Phase space: mass matrices, momentum draws and the augmented density
//! `π(θ, p) = π_θ(θ) · N(p; 0, M)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::targets::{evaluate_checked, TargetDensity};

#[derive(Clone, Debug)]
enum MassKind {
    Identity,
    Diagonal {
        inverse: Vec<f64>,
        sqrt_mass: Vec<f64>,
    },
    Dense {
        mass: Matrix,
        inverse: Matrix,
        mass_chol: Cholesky,
    },
}

/// Momentum covariance `M`.
#[derive(Clone, Debug)]
pub struct MassMatrix {
    dim: usize,
    kind: MassKind,
}

impl MassMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kind: MassKind::Identity,
        }
    }

    pub fn diagonal(mass: Vec<f64>) -> Result<Self, Error> {
        if mass.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(invalid("diagonal mass entries must be finite and positive"));
        }
        Ok(Self {
            dim: mass.len(),
            kind: MassKind::Diagonal {
                inverse: mass.iter().map(|m| 1.0 / m).collect(),
                sqrt_mass: mass.iter().map(|m| libm::sqrt(*m)).collect(),
            },
        })
    }

    /// Diagonal mass given its inverse (the target's marginal variances).
    pub fn from_inverse_diagonal(inverse: &[f64]) -> Result<Self, Error> {
        if inverse.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(invalid("inverse mass entries must be finite and positive"));
        }
        Self::diagonal(inverse.iter().map(|v| 1.0 / v).collect())
    }

    pub fn dense(mass: Matrix) -> Result<Self, Error> {
        let mass_chol = Cholesky::new(&mass)?;
        let inverse = mass_chol.inverse();
        Ok(Self {
            dim: mass.rows(),
            kind: MassKind::Dense {
                mass,
                inverse,
                mass_chol,
            },
        })
    }

    /// Dense mass `M = Σ⁻¹` given an estimated target covariance `Σ`.
    pub fn from_inverse(inverse: Matrix) -> Result<Self, Error> {
        let mass = Cholesky::new(&inverse)?.inverse();
        let mass_chol = Cholesky::new(&mass)?;
        Ok(Self {
            dim: mass.rows(),
            kind: MassKind::Dense {
                mass,
                inverse,
                mass_chol,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MassKind::Identity)
    }

    pub fn to_matrix(&self) -> Matrix {
        match &self.kind {
            MassKind::Identity => Matrix::identity(self.dim),
            MassKind::Diagonal { sqrt_mass, .. } => {
                Matrix::from_diagonal(&sqrt_mass.iter().map(|s| s * s).collect::<Vec<_>>())
            }
            MassKind::Dense { mass, .. } => mass.clone(),
        }
    }

    pub fn inverse_matrix(&self) -> Matrix {
        match &self.kind {
            MassKind::Identity => Matrix::identity(self.dim),
            MassKind::Diagonal { inverse, .. } => Matrix::from_diagonal(inverse),
            MassKind::Dense { inverse, .. } => inverse.clone(),
        }
    }

    /// `out = M⁻¹ p`
    pub fn apply_inverse_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.kind {
            MassKind::Identity => out.copy_from_slice(p),
            MassKind::Diagonal { inverse, .. } => {
                for ((o, p), m) in out.iter_mut().zip(p).zip(inverse) {
                    *o = p * m;
                }
            }
            MassKind::Dense { inverse, .. } => inverse.mul_vec_into(p, out),
        }
    }

    pub fn apply_inverse(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_inverse_into(p, &mut out);
        out
    }

    /// `½ pᵀ M⁻¹ p`
    pub fn kinetic_energy(&self, p: &[f64]) -> f64 {
        match &self.kind {
            MassKind::Identity => 0.5 * dot(p, p),
            MassKind::Diagonal { inverse, .. } => {
                0.5 * p.iter().zip(inverse).map(|(p, m)| p * p * m).sum::<f64>()
            }
            MassKind::Dense { inverse, .. } => 0.5 * dot(p, &inverse.mul_vec(p)),
        }
    }

    /// Draws `p ~ N(0, M)`. Consumes exactly `dim` standard normal deviates.
    pub fn draw_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        match &self.kind {
            MassKind::Identity => z,
            MassKind::Diagonal { sqrt_mass, .. } => {
                z.iter().zip(sqrt_mass).map(|(z, s)| z * s).collect()
            }
            MassKind::Dense { mass_chol, .. } => mass_chol.lower_mul(&z),
        }
    }
}

pub fn draw_momentum<R: Rng + ?Sized>(mass: &MassMatrix, rng: &mut R) -> Vec<f64> {
    mass.draw_momentum(rng)
}

/// `log π_θ(θ) − ½ pᵀM⁻¹p`
pub fn joint_log_density<T: TargetDensity + ?Sized>(
    theta: &[f64],
    p: &[f64],
    target: &T,
    mass: &MassMatrix,
) -> Result<f64, Error> {
    let d = target.dim();
    for len in [theta.len(), p.len(), mass.dim()] {
        if len != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: len,
            });
        }
    }
    Ok(target.log_density(theta)? - mass.kinetic_energy(p))
}

/// Position–momentum pair with its target log-density, gradient and joint
/// log-density cached. Fields are only reachable through constructors that
/// keep the caches in sync.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    theta: Vec<f64>,
    momentum: Vec<f64>,
    log_density: f64,
    grad: Vec<f64>,
    joint: f64,
}

impl PhasePoint {
    /// Evaluates the target at `theta`. Fails on non-finite values.
    pub fn new<T: TargetDensity + ?Sized>(
        theta: Vec<f64>,
        momentum: Vec<f64>,
        target: &T,
        mass: &MassMatrix,
    ) -> Result<Self, Error> {
        let d = target.dim();
        for len in [theta.len(), momentum.len(), mass.dim()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: len,
                });
            }
        }
        let mut grad = vec![0.0; d];
        let log_density = evaluate_checked(target, &theta, &mut grad)?;
        Ok(Self::from_parts(theta, momentum, log_density, grad, mass))
    }

    pub(crate) fn from_parts(
        theta: Vec<f64>,
        momentum: Vec<f64>,
        log_density: f64,
        grad: Vec<f64>,
        mass: &MassMatrix,
    ) -> Self {
        let joint = log_density - mass.kinetic_energy(&momentum);
        Self {
            theta,
            momentum,
            log_density,
            grad,
            joint,
        }
    }

    /// Same position, new momentum; the position caches are reused.
    pub fn with_momentum(mut self, momentum: Vec<f64>, mass: &MassMatrix) -> Self {
        debug_assert_eq!(momentum.len(), self.theta.len());
        self.joint = self.log_density - mass.kinetic_energy(&momentum);
        self.momentum = momentum;
        self
    }

    /// Flips `p → −p`. The kinetic term is even, so the joint is unchanged.
    pub fn negate_momentum(&mut self) {
        self.momentum.iter_mut().for_each(|p| *p = -*p);
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn log_density(&self) -> f64 {
        self.log_density
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    /// `log π(θ, p)` under the dropped-constants convention.
    pub fn joint_log_density(&self) -> f64 {
        self.joint
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }
}
