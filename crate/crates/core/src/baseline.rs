//! Multi-proposal baseline: a window of `K + 1` leapfrog states around the
//! current point, with draws taken in proportion to their joint density.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;

use crate::hmc::{accept_probability, Diagnostics, IterationBatch, RecycledDraw};
use crate::integrator::{leapfrog_step, leapfrog_step_backward};
use crate::phase::{MassMatrix, PhasePoint};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// States `F^k(z)` for `k = −L, …, K − L` in trajectory order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalWindow {
    states: Vec<PhasePoint>,
    offset: usize,
    weights: Vec<f64>,
}

impl ProposalWindow {
    /// `offset` is the index of the current state within `states`.
    pub fn new(states: Vec<PhasePoint>, offset: usize) -> Self {
        assert!(offset < states.len(), "window offset out of range");
        let joints: Vec<f64> = states.iter().map(|z| z.joint_log_density()).collect();
        let weights = softmax(&joints);
        Self {
            states,
            offset,
            weights,
        }
    }

    pub fn states(&self) -> &[PhasePoint] {
        &self.states
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn current(&self) -> &PhasePoint {
        &self.states[self.offset]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Normalized `exp(x)` via log-sum-exp.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_weights.iter().map(|w| libm::exp(w - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Signed index of the MH proposal: `K − L` if `K − L ≥ L`, else `−L`.
pub fn proposal_offset(k: usize, l: usize) -> i64 {
    if k - l >= l {
        (k - l) as i64
    } else {
        -(l as i64)
    }
}

/// Builds `{F^k(z), k = −L, …, K − L}`. `None` on divergence.
pub fn build_window<T: TargetDensity + ?Sized>(
    z: &PhasePoint,
    k: usize,
    l: usize,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
) -> Option<ProposalWindow> {
    let mut backward = Vec::with_capacity(l);
    let mut cur = z.clone();
    for _ in 0..l {
        cur = leapfrog_step_backward(&cur, eps, target, mass).ok()?;
        backward.push(cur.clone());
    }
    backward.reverse();
    let mut states = backward;
    states.push(z.clone());
    let mut cur = z.clone();
    for _ in 0..k - l {
        cur = leapfrog_step(&cur, eps, target, mass).ok()?;
        states.push(cur.clone());
    }
    Some(ProposalWindow::new(states, l))
}

/// One iteration of the window scheme. The next state is decided by a
/// Metropolis test against the window end `F^ℓ`; `K` draws are taken
/// independently from the window with its normalized weights.
pub fn calderhead_iteration<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    k: usize,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
    streams: &mut ChainStreams,
    iteration: usize,
) -> (IterationBatch, ProposalWindow) {
    let l = streams.momentum.random_range(0..=k);
    let p = mass.draw_momentum(&mut streams.momentum);
    let start = state.clone().with_momentum(p, mass);
    let u: f64 = streams.accept.random();

    let built = build_window(&start, k, l, eps, target, mass);
    let divergent = built.is_none();
    let window = built.unwrap_or_else(|| ProposalWindow::new(vec![start.clone()], 0));

    let (next, alpha) = if divergent {
        (start.clone(), 0.0)
    } else {
        let idx = (l as i64 + proposal_offset(k, l)) as usize;
        let proposal = &window.states[idx];
        let alpha = accept_probability(&start, proposal);
        if u < alpha {
            (proposal.clone(), alpha)
        } else {
            (start.clone(), alpha)
        }
    };
    let accepted = !divergent && alpha > u;

    let recycled = if k == 0 {
        Vec::new()
    } else {
        let dist = WeightedIndex::new(&window.weights).expect("window weights are a probability vector");
        (0..k)
            .map(|slot| RecycledDraw {
                theta: window.states[dist.sample(&mut streams.recycle)].theta().to_vec(),
                momentum: None,
                weight: 1.0,
                iteration,
                slot,
            })
            .collect()
    };

    let h0 = start.joint_log_density();
    let max_energy_error = if divergent {
        f64::INFINITY
    } else {
        window
            .states
            .iter()
            .map(|z| (z.joint_log_density() - h0).abs())
            .fold(0.0, f64::max)
    };
    let batch = IterationBatch {
        next,
        recycled,
        diagnostics: Diagnostics {
            accept_stat: alpha,
            max_energy_error,
            grad_evals: if divergent { k.max(1) } else { k },
            steps: k,
            accepted,
            divergent,
            ..Diagnostics::default()
        },
    };
    (batch, window)
}

/// One draw per window state, weighted by the window weights.
pub fn calderhead_rao_blackwell(window: &ProposalWindow, iteration: usize) -> Vec<RecycledDraw> {
    window
        .states
        .iter()
        .zip(&window.weights)
        .enumerate()
        .map(|(slot, (z, w))| RecycledDraw {
            theta: z.theta().to_vec(),
            momentum: None,
            weight: *w,
            iteration,
            slot,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_gaussian, Gaussian, GaussianSpec};
    use approx::assert_relative_eq;

    fn std1() -> Gaussian {
        make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap()
    }

    #[test]
    fn offset_rule() {
        assert_eq!(proposal_offset(4, 1), 3);
        assert_eq!(proposal_offset(4, 3), -3);
        assert_eq!(proposal_offset(4, 2), 2);
        assert_eq!(proposal_offset(0, 0), 0);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[3.0]), vec![1.0]);
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let w = softmax(&[0.0, -1.0]);
        assert_relative_eq!(w[0], 0.731059, epsilon = 1e-6);
        assert_relative_eq!(w[1], 0.268941, epsilon = 1e-6);
        let big = softmax(&[1e4, 1e4 - 1.0]);
        assert_relative_eq!(big[0], 0.731059, epsilon = 1e-6);
    }

    #[test]
    fn empty_window_keeps_state() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.7], vec![0.0], &t, &m).unwrap();
        let mut s = ChainStreams::new(4, 0);
        let (b, w) = calderhead_iteration(&z, 0, 0.3, &t, &m, &mut s, 0);
        assert_eq!(w.len(), 1);
        assert_eq!(b.next.theta(), &[0.7]);
        assert!(b.recycled.is_empty());
        let rb = calderhead_rao_blackwell(&w, 0);
        assert_eq!(rb.len(), 1);
        assert_eq!(rb[0].weight, 1.0);
    }

    #[test]
    fn window_is_shift_invariant() {
        let t = std1();
        let m = MassMatrix::identity(1);
        let z = PhasePoint::new(vec![0.4], vec![0.9], &t, &m).unwrap();
        let w = build_window(&z, 5, 2, 0.2, &t, &m).unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(w.current(), &z);
        let origin = w.states()[0].clone();
        let w0 = build_window(&origin, 5, 0, 0.2, &t, &m).unwrap();
        for (a, b) in w.states().iter().zip(w0.states()) {
            assert_relative_eq!(a.theta()[0], b.theta()[0], epsilon = 1e-12);
            assert_relative_eq!(a.momentum()[0], b.momentum()[0], epsilon = 1e-12);
        }
        let total: f64 = w.weights().iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }
}
