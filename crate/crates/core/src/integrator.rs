//! Leapfrog map `F_ε` and trajectories built from it.

use alloc::vec::Vec;

use crate::error::{invalid, Error};
use crate::phase::{MassMatrix, PhasePoint};
use crate::targets::{evaluate_checked, TargetDensity};

/// Positive, finite step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeapfrogConfig {
    epsilon: f64,
}

impl LeapfrogConfig {
    pub fn new(epsilon: f64) -> Result<Self, Error> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("step size must be positive and finite"));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// One leapfrog step: half kick, drift, half kick.
///
/// Reuses the gradient cached in `z` and evaluates the target exactly once,
/// at the new position. A non-finite density or gradient there is reported
/// as [`Error::Divergence`] with `step = 1`.
pub fn leapfrog_step<T: TargetDensity + ?Sized>(
    z: &PhasePoint,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
) -> Result<PhasePoint, Error> {
    let half = 0.5 * eps;
    let mut p: Vec<f64> = z
        .momentum()
        .iter()
        .zip(z.grad())
        .map(|(p, g)| p + half * g)
        .collect();
    let velocity = mass.apply_inverse(&p);
    let theta: Vec<f64> = z
        .theta()
        .iter()
        .zip(&velocity)
        .map(|(t, v)| t + eps * v)
        .collect();
    let mut grad = alloc::vec![0.0; theta.len()];
    let log_density = match evaluate_checked(target, &theta, &mut grad) {
        Ok(lp) => lp,
        Err(_) => return Err(Error::Divergence { step: 1, theta }),
    };
    for (p, g) in p.iter_mut().zip(&grad) {
        *p += half * g;
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step: 1, theta });
    }
    Ok(PhasePoint::from_parts(theta, p, log_density, grad, mass))
}

/// `F_ε⁻¹` realized as momentum flip, forward step, momentum flip.
pub fn leapfrog_step_backward<T: TargetDensity + ?Sized>(
    z: &PhasePoint,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
) -> Result<PhasePoint, Error> {
    let mut flipped = z.clone();
    flipped.negate_momentum();
    let mut out = leapfrog_step(&flipped, eps, target, mass)?;
    out.negate_momentum();
    Ok(out)
}

/// Lazily evaluated trajectory `F_ε¹(z₀), F_ε²(z₀), …`.
///
/// Yields `Err(Divergence)` once (with the 1-based step index) and then
/// stops.
pub struct Trajectory<'a, T: ?Sized> {
    current: PhasePoint,
    eps: f64,
    target: &'a T,
    mass: &'a MassMatrix,
    step: usize,
    done: bool,
}

impl<'a, T: TargetDensity + ?Sized> Trajectory<'a, T> {
    pub fn new(z0: PhasePoint, eps: f64, target: &'a T, mass: &'a MassMatrix) -> Self {
        Self {
            current: z0,
            eps,
            target,
            mass,
            step: 0,
            done: false,
        }
    }

    /// Steps taken so far, including a diverging one.
    pub fn steps(&self) -> usize {
        self.step
    }
}

impl<T: TargetDensity + ?Sized> Iterator for Trajectory<'_, T> {
    type Item = Result<PhasePoint, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.step += 1;
        match leapfrog_step(&self.current, self.eps, self.target, self.mass) {
            Ok(next) => {
                self.current = next.clone();
                Some(Ok(next))
            }
            Err(Error::Divergence { theta, .. }) => {
                self.done = true;
                Some(Err(Error::Divergence {
                    step: self.step,
                    theta,
                }))
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// `[F_ε¹(z₀), …, F_εᴷ(z₀)]`, excluding `z₀`.
pub fn simulate_trajectory<T: TargetDensity + ?Sized>(
    z0: &PhasePoint,
    eps: f64,
    steps: usize,
    target: &T,
    mass: &MassMatrix,
) -> Result<Vec<PhasePoint>, Error> {
    if steps == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    Trajectory::new(z0.clone(), eps, target, mass)
        .take(steps)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::TargetError;
    use crate::targets::{make_gaussian, Gaussian, GaussianSpec};
    use alloc::vec;
    use approx::assert_relative_eq;
    use core::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<'a> {
        inner: &'a Gaussian,
        calls: AtomicUsize,
    }

    impl TargetDensity for Counting<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn log_density_and_grad(&self, t: &[f64], g: &mut [f64]) -> Result<f64, TargetError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.log_density_and_grad(t, g)
        }
    }

    fn std1() -> Gaussian {
        make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap()
    }

    #[test]
    fn fixed_point_at_mode() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.0], vec![0.0], &t, &m).unwrap();
        let z1 = leapfrog_step(&z, 0.37, &t, &m).unwrap();
        assert_eq!(z1.theta(), &[0.0]);
        assert_eq!(z1.momentum(), &[0.0]);
    }

    #[test]
    fn hand_evaluated_step() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![1.0], vec![0.0], &t, &m).unwrap();
        let z1 = leapfrog_step(&z, 0.1, &t, &m).unwrap();
        // p½ = −0.05, θ₁ = 0.995, p₁ = −0.05 − 0.05·0.995
        assert_relative_eq!(z1.theta()[0], 0.995, epsilon = 1e-15);
        assert_relative_eq!(z1.momentum()[0], -0.09975, epsilon = 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.4], vec![-1.2], &t, &m).unwrap();
        let z1 = leapfrog_step(&z, 0.0, &t, &m).unwrap();
        assert_eq!(z1, z);
    }

    #[test]
    fn one_gradient_per_step() {
        let g = std1();
        let counting = Counting {
            inner: &g,
            calls: AtomicUsize::new(0),
        };
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![1.0], vec![0.5], &counting, &m).unwrap();
        assert_eq!(counting.calls.load(Ordering::Relaxed), 1);
        let traj = simulate_trajectory(&z, 0.1, 25, &counting, &m).unwrap();
        assert_eq!(traj.len(), 25);
        assert_eq!(counting.calls.load(Ordering::Relaxed), 26);
        let single = leapfrog_step(&z, 0.1, &g, &m).unwrap();
        assert_eq!(simulate_trajectory(&z, 0.1, 1, &g, &m).unwrap(), vec![single]);
    }

    #[test]
    fn quarter_period_rotation() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let (t0, p0) = (0.8, -0.3);
        let z = PhasePoint::new(vec![t0], vec![p0], &t, &m).unwrap();
        let traj = simulate_trajectory(&z, 0.01, 157, &t, &m).unwrap();
        let end = traj.last().unwrap();
        // exact flow after time 1.57 ≈ π/2: (θ, p) → (p₀, −θ₀) up to the
        // 8e-4 rad shortfall of 1.57 against π/2 and O(ε²) error
        let tau = 1.57_f64;
        let exact_t = t0 * libm::cos(tau) + p0 * libm::sin(tau);
        let exact_p = -t0 * libm::sin(tau) + p0 * libm::cos(tau);
        assert!((end.theta()[0] - exact_t).abs() < 1e-4);
        assert!((end.momentum()[0] - exact_p).abs() < 1e-4);
        assert!((end.theta()[0] - p0).abs() < 2e-3);
        assert!((end.momentum()[0] + t0).abs() < 2e-3);
    }

    struct HalfLine;
    impl TargetDensity for HalfLine {
        fn dim(&self) -> usize {
            1
        }
        fn log_density_and_grad(&self, t: &[f64], g: &mut [f64]) -> Result<f64, TargetError> {
            if t[0] <= 0.0 {
                return Err(TargetError::OutOfSupport { index: 0 });
            }
            g[0] = 1.0 / t[0] - 1.0;
            Ok(libm::log(t[0]) - t[0])
        }
    }

    #[test]
    fn divergence_reports_step_and_point() {
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.5], vec![-6.0], &HalfLine, &m).unwrap();
        let out = simulate_trajectory(&z, 0.2, 10, &HalfLine, &m);
        match out {
            Err(Error::Divergence { step, theta }) => {
                assert!(step >= 1 && step <= 10);
                assert!(theta[0] <= 0.0);
            }
            other => panic!("expected divergence, got {:?}", other),
        }
        let mut it = Trajectory::new(z, 0.2, &HalfLine, &m);
        let n_ok = it.by_ref().take_while(|r| r.is_ok()).count();
        assert!(it.next().is_none());
        assert!(n_ok < 10);
    }

    #[test]
    fn backward_step_inverts_forward() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.3], vec![1.1], &t, &m).unwrap();
        let f = leapfrog_step(&z, 0.25, &t, &m).unwrap();
        let back = leapfrog_step_backward(&f, 0.25, &t, &m).unwrap();
        assert_relative_eq!(back.theta()[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(back.momentum()[0], 1.1, epsilon = 1e-15);
    }
}
