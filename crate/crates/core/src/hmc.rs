//! Standard HMC and recycled HMC.
//!
//! Recycled HMC accepts or rejects every intermediate leapfrog state
//! against the trajectory start with its own uniform, and emits the result
//! as an extra draw. The chain itself follows the standard HMC transition:
//! the endpoint test uses the `accept` stream only, so the next-state
//! sequence is bit-identical with recycling on or off.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error};
use crate::integrator::Trajectory;
use crate::phase::{MassMatrix, PhasePoint};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// Distribution `π_L` of the number of leapfrog steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathLength {
    Fixed(usize),
    /// Uniform on `{min, …, max}`.
    Uniform { min: usize, max: usize },
    /// `τ ~ Uniform[tau_lo, tau_hi]`, steps `= round(τ/ε)`, at least one.
    TimeJitter { tau_lo: f64, tau_hi: f64 },
}

impl PathLength {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            PathLength::Fixed(l) if l >= 1 => Ok(()),
            PathLength::Uniform { min, max } if min >= 1 && max >= min => Ok(()),
            PathLength::TimeJitter { tau_lo, tau_hi }
                if tau_lo > 0.0 && tau_hi >= tau_lo && tau_hi.is_finite() =>
            {
                Ok(())
            }
            _ => Err(invalid("path length distribution must have support within {1, 2, …}")),
        }
    }

    /// Largest number of steps `K` with positive probability.
    pub fn max_steps(&self, eps: f64) -> usize {
        match *self {
            PathLength::Fixed(l) => l,
            PathLength::Uniform { max, .. } => max,
            PathLength::TimeJitter { tau_hi, .. } => steps_for(tau_hi, eps),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> usize {
        match *self {
            PathLength::Fixed(l) => l,
            PathLength::Uniform { min, max } => rng.random_range(min..=max),
            PathLength::TimeJitter { tau_lo, tau_hi } => {
                let u: f64 = rng.random();
                steps_for(tau_lo + (tau_hi - tau_lo) * u, eps)
            }
        }
    }
}

fn steps_for(tau: f64, eps: f64) -> usize {
    let steps = libm::round(tau / eps);
    if steps >= 1.0 {
        steps as usize
    } else {
        1
    }
}

/// Which slots a recycled HMC iteration recycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecycleMode {
    /// Simulate all `K = max_steps` steps and recycle from `{1, …, K}`.
    FullK,
    /// Simulate only the `L` drawn steps and recycle from `{1, …, L}`.
    LOnly,
}

/// Random subset `S ⊆ {1, …, n}` of slots to keep, drawn from its own
/// stream independently of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsetScheme {
    All,
    /// `m` slots without replacement (all of them when `n ≤ m`).
    Random { m: usize },
    /// Every `2^log2_stride`-th slot starting at a uniformly random offset.
    Strided { log2_stride: u32 },
}

impl SubsetScheme {
    pub fn validate(&self) -> Result<(), Error> {
        match *self {
            SubsetScheme::Random { m: 0 } => Err(invalid("random subset size must be positive")),
            SubsetScheme::Strided { log2_stride } if log2_stride > 30 => {
                Err(invalid("stride exponent too large"))
            }
            _ => Ok(()),
        }
    }

    /// Sorted 1-based slots.
    pub fn select<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        match *self {
            SubsetScheme::All => (1..=n).collect(),
            SubsetScheme::Random { m } => {
                if n <= m {
                    (1..=n).collect()
                } else {
                    let mut v: Vec<usize> = index::sample(rng, n, m).into_iter().map(|i| i + 1).collect();
                    v.sort_unstable();
                    v
                }
            }
            SubsetScheme::Strided { log2_stride } => {
                let stride = 1usize << log2_stride;
                let offset = rng.random_range(1..=stride);
                (offset..=n).step_by(stride).collect()
            }
        }
    }
}

/// Recycling settings for HMC.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HmcRecycling {
    pub mode: RecycleMode,
    pub subset: SubsetScheme,
    /// Store momenta alongside positions in recycled draws.
    pub keep_momentum: bool,
}

impl Default for HmcRecycling {
    fn default() -> Self {
        Self {
            mode: RecycleMode::LOnly,
            subset: SubsetScheme::All,
            keep_momentum: false,
        }
    }
}

/// One atom of the recycled empirical measure.
#[derive(Clone, Debug, PartialEq)]
pub struct RecycledDraw {
    pub theta: Vec<f64>,
    pub momentum: Option<Vec<f64>>,
    pub weight: f64,
    pub iteration: usize,
    /// Leapfrog step index for HMC, position in the returned list otherwise.
    pub slot: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// HMC: endpoint acceptance probability. NUTS: mean of
    /// `min(1, π(leaf)/π(start))` over all leaves built.
    pub accept_stat: f64,
    pub max_energy_error: f64,
    pub grad_evals: usize,
    /// Leapfrog steps of the trajectory (`L` for HMC).
    pub steps: usize,
    pub accepted: bool,
    pub divergent: bool,
    pub tree_depth: Option<usize>,
    pub n_acceptable: Option<usize>,
    pub max_depth_reached: bool,
}

/// Output of one transition.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationBatch {
    pub next: PhasePoint,
    pub recycled: Vec<RecycledDraw>,
    pub diagnostics: Diagnostics,
}

/// `min(1, π(to)/π(from))` computed in the log domain.
pub fn accept_probability(from: &PhasePoint, to: &PhasePoint) -> f64 {
    accept_probability_log(from.joint_log_density(), to.joint_log_density())
}

pub(crate) fn accept_probability_log(from: f64, to: f64) -> f64 {
    let delta = to - from;
    if delta.is_nan() {
        return 0.0;
    }
    if delta >= 0.0 {
        1.0
    } else {
        libm::exp(delta)
    }
}

struct Simulated {
    start: PhasePoint,
    /// `path[k-1] = F^k(start)` for the finite prefix.
    path: Vec<PhasePoint>,
    divergent: bool,
    grad_evals: usize,
}

fn simulate<T: TargetDensity + ?Sized>(
    start: PhasePoint,
    steps: usize,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
) -> Simulated {
    let mut path = Vec::with_capacity(steps);
    let mut divergent = false;
    let mut traj = Trajectory::new(start.clone(), eps, target, mass);
    for step in traj.by_ref().take(steps) {
        match step {
            Ok(z) => path.push(z),
            Err(_) => {
                divergent = true;
                break;
            }
        }
    }
    let grad_evals = traj.steps();
    Simulated {
        start,
        path,
        divergent,
        grad_evals,
    }
}

fn refresh<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    mass: &MassMatrix,
    streams: &mut ChainStreams,
) -> PhasePoint {
    let p = mass.draw_momentum(&mut streams.momentum);
    state.clone().with_momentum(p, mass)
}

/// Decides the next state from the `l`-th point of the trajectory.
fn endpoint(sim: &Simulated, l: usize, streams: &mut ChainStreams) -> (PhasePoint, f64, bool) {
    let u: f64 = streams.accept.random();
    match sim.path.get(l - 1) {
        Some(end) => {
            let alpha = accept_probability(&sim.start, end);
            if u < alpha {
                (end.clone(), alpha, true)
            } else {
                (sim.start.clone(), alpha, false)
            }
        }
        None => (sim.start.clone(), 0.0, false),
    }
}

fn max_energy_error(sim: &Simulated) -> f64 {
    let h0 = sim.start.joint_log_density();
    let finite = sim
        .path
        .iter()
        .map(|z| (z.joint_log_density() - h0).abs())
        .fold(0.0, f64::max);
    if sim.divergent {
        f64::INFINITY
    } else {
        finite
    }
}

/// Standard HMC: draw `L`, refresh momentum, `L` leapfrog steps, accept
/// the endpoint. A divergence rejects.
pub fn hmc_iteration_standard<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    path: &PathLength,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
    streams: &mut ChainStreams,
) -> IterationBatch {
    let l = path.sample(eps, &mut streams.momentum);
    let start = refresh::<T>(state, mass, streams);
    let sim = simulate(start, l, eps, target, mass);
    let (next, alpha, accepted) = endpoint(&sim, l, streams);
    IterationBatch {
        next,
        recycled: Vec::new(),
        diagnostics: Diagnostics {
            accept_stat: alpha,
            max_energy_error: max_energy_error(&sim),
            grad_evals: sim.grad_evals,
            steps: l,
            accepted,
            divergent: sim.divergent,
            ..Diagnostics::default()
        },
    }
}

/// Recycled HMC. Each selected slot `k` yields `F^k(z₀)` when an
/// independent uniform from the `recycle` stream falls below
/// `min(1, π(F^k z₀)/π(z₀))`, and `θ₀` otherwise. Draws carry unit weight,
/// so pooled estimates normalize by the total number of recycled slots.
#[allow(clippy::too_many_arguments)]
pub fn hmc_iteration_recycled<T: TargetDensity + ?Sized>(
    state: &PhasePoint,
    path: &PathLength,
    eps: f64,
    target: &T,
    mass: &MassMatrix,
    recycling: &HmcRecycling,
    streams: &mut ChainStreams,
    iteration: usize,
) -> IterationBatch {
    let l = path.sample(eps, &mut streams.momentum);
    let start = refresh::<T>(state, mass, streams);
    let horizon = match recycling.mode {
        RecycleMode::LOnly => l,
        RecycleMode::FullK => path.max_steps(eps).max(l),
    };
    let sim = simulate(start, horizon, eps, target, mass);
    let (next, alpha, accepted) = endpoint(&sim, l, streams);

    let slots = recycling.subset.select(horizon, &mut streams.subset);
    let h0 = sim.start.joint_log_density();
    let recycled = slots
        .into_iter()
        .take_while(|&k| k <= sim.path.len())
        .map(|k| {
            let proposal = &sim.path[k - 1];
            let u: f64 = streams.recycle.random();
            let chosen = if u < accept_probability_log(h0, proposal.joint_log_density()) {
                proposal
            } else {
                &sim.start
            };
            RecycledDraw {
                theta: chosen.theta().to_vec(),
                momentum: recycling.keep_momentum.then(|| chosen.momentum().to_vec()),
                weight: 1.0,
                iteration,
                slot: k,
            }
        })
        .collect();

    IterationBatch {
        next,
        recycled,
        diagnostics: Diagnostics {
            accept_stat: alpha,
            max_energy_error: max_energy_error(&sim),
            grad_evals: sim.grad_evals,
            steps: l,
            accepted,
            divergent: sim.divergent,
            ..Diagnostics::default()
        },
    }
}
