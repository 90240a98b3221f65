//! Sampler selection and chain driving.

use alloc::vec::Vec;

use crate::baseline::{calderhead_iteration, calderhead_rao_blackwell};
use crate::error::{invalid, Error};
use crate::hmc::{
    hmc_iteration_recycled, hmc_iteration_standard, Diagnostics, HmcRecycling, IterationBatch,
    PathLength,
};
use crate::nuts::{nuts_iteration, RecycleStrategy};
use crate::phase::{MassMatrix, PhasePoint};
use crate::streams::ChainStreams;
use crate::targets::TargetDensity;

/// Which draws the window baseline returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowDraws {
    None,
    /// `K` independent draws from the window.
    Sampled,
    /// Every window state with its normalized weight.
    RaoBlackwell,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    Hmc {
        path: PathLength,
        recycling: Option<HmcRecycling>,
    },
    Nuts {
        max_depth: usize,
        strategy: RecycleStrategy,
    },
    Calderhead {
        window: usize,
        draws: WindowDraws,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            KernelSpec::Hmc { path, recycling } => {
                path.validate()?;
                if let Some(r) = recycling {
                    r.subset.validate()?;
                }
                Ok(())
            }
            KernelSpec::Nuts {
                max_depth,
                strategy,
            } => {
                if *max_depth == 0 || *max_depth > 30 {
                    return Err(invalid("NUTS depth limit must be in 1..=30"));
                }
                strategy.validate()
            }
            KernelSpec::Calderhead { .. } => Ok(()),
        }
    }

    pub fn is_recycling(&self) -> bool {
        match self {
            KernelSpec::Hmc { recycling, .. } => recycling.is_some(),
            KernelSpec::Nuts { strategy, .. } => *strategy != RecycleStrategy::None,
            KernelSpec::Calderhead { draws, .. } => *draws != WindowDraws::None,
        }
    }

    /// Same transition with recycling switched off. The next-state sequence
    /// is unchanged for a given seed.
    pub fn without_recycling(&self) -> KernelSpec {
        match *self {
            KernelSpec::Hmc { path, .. } => KernelSpec::Hmc {
                path,
                recycling: None,
            },
            KernelSpec::Nuts { max_depth, .. } => KernelSpec::Nuts {
                max_depth,
                strategy: RecycleStrategy::None,
            },
            KernelSpec::Calderhead { window, .. } => KernelSpec::Calderhead {
                window,
                draws: WindowDraws::None,
            },
        }
    }

    pub fn transition<T: TargetDensity + ?Sized>(
        &self,
        state: &PhasePoint,
        eps: f64,
        target: &T,
        mass: &MassMatrix,
        streams: &mut ChainStreams,
        iteration: usize,
    ) -> IterationBatch {
        match self {
            KernelSpec::Hmc {
                path,
                recycling: None,
            } => hmc_iteration_standard(state, path, eps, target, mass, streams),
            KernelSpec::Hmc {
                path,
                recycling: Some(r),
            } => hmc_iteration_recycled(state, path, eps, target, mass, r, streams, iteration),
            KernelSpec::Nuts {
                max_depth,
                strategy,
            } => nuts_iteration(state, eps, target, mass, *max_depth, *strategy, streams, iteration),
            KernelSpec::Calderhead { window, draws } => {
                let (mut batch, win) =
                    calderhead_iteration(state, *window, eps, target, mass, streams, iteration);
                match draws {
                    WindowDraws::None => batch.recycled.clear(),
                    WindowDraws::Sampled => {}
                    WindowDraws::RaoBlackwell => batch.recycled = calderhead_rao_blackwell(&win, iteration),
                }
                batch
            }
        }
    }

    /// Weighted draws this iteration contributes to the estimators.
    ///
    /// Plain kernels contribute the next state. Recycled HMC, the window
    /// baseline and the Rao-Blackwell and negative-control NUTS variants
    /// contribute their recycled draws only. Simple and evenly-spread NUTS
    /// contribute the next state plus the recycled draws.
    pub fn estimator_draws<'a>(&self, batch: &'a IterationBatch) -> Vec<(&'a [f64], f64)> {
        let next = || (batch.next.theta(), 1.0);
        let recycled = || batch.recycled.iter().map(|d| (d.theta.as_slice(), d.weight));
        match self {
            KernelSpec::Hmc { recycling: Some(_), .. }
            | KernelSpec::Nuts {
                strategy: RecycleStrategy::RaoBlackwell | RecycleStrategy::AllLeaves,
                ..
            }
            | KernelSpec::Calderhead {
                draws: WindowDraws::Sampled | WindowDraws::RaoBlackwell,
                ..
            } => recycled().collect(),
            KernelSpec::Nuts {
                strategy: RecycleStrategy::Simple(_) | RecycleStrategy::EvenlySpread(_),
                ..
            } => core::iter::once(next()).chain(recycled()).collect(),
            _ => alloc::vec![next()],
        }
    }
}

/// A single chain advanced one transition at a time.
pub struct Chain<'a, T: ?Sized> {
    target: &'a T,
    spec: KernelSpec,
    eps: f64,
    mass: MassMatrix,
    state: PhasePoint,
    streams: ChainStreams,
    iteration: usize,
}

impl<'a, T: TargetDensity + ?Sized> Chain<'a, T> {
    pub fn new(
        target: &'a T,
        theta0: Vec<f64>,
        spec: KernelSpec,
        eps: f64,
        mass: MassMatrix,
        streams: ChainStreams,
    ) -> Result<Self, Error> {
        spec.validate()?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("step size must be positive and finite"));
        }
        let d = target.dim();
        let state = PhasePoint::new(theta0, alloc::vec![0.0; d], target, &mass)?;
        Ok(Self {
            target,
            spec,
            eps,
            mass,
            state,
            streams,
            iteration: 0,
        })
    }

    pub fn step(&mut self) -> IterationBatch {
        let batch = self.spec.transition(
            &self.state,
            self.eps,
            self.target,
            &self.mass,
            &mut self.streams,
            self.iteration,
        );
        self.state = batch.next.clone();
        self.iteration += 1;
        batch
    }

    pub fn state(&self) -> &PhasePoint {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn set_step_size(&mut self, eps: f64) {
        self.eps = eps;
    }

    pub fn set_mass(&mut self, mass: MassMatrix) {
        self.mass = mass;
    }

    pub fn into_state(self) -> PhasePoint {
        self.state
    }
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    /// Post burn-in iterations.
    pub batches: Vec<IterationBatch>,
    pub burn_in: Vec<Diagnostics>,
}

impl ChainOutput {
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.batches.iter().map(|b| b.next.theta())
    }

    pub fn divergences(&self) -> usize {
        self.batches.iter().filter(|b| b.diagnostics.divergent).count()
    }
}

/// Runs `burn_in + n` transitions of chain `chain` under `seed` and keeps
/// the last `n` batches.
#[allow(clippy::too_many_arguments)]
pub fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    theta0: Vec<f64>,
    spec: KernelSpec,
    eps: f64,
    mass: MassMatrix,
    n: usize,
    burn_in: usize,
    seed: u64,
    chain: u64,
) -> Result<ChainOutput, Error> {
    if n == 0 {
        return Err(invalid("chain length must be at least 1"));
    }
    let mut c = Chain::new(target, theta0, spec, eps, mass, ChainStreams::new(seed, chain))?;
    let burn = (0..burn_in).map(|_| c.step().diagnostics).collect();
    let batches = (0..n).map(|_| c.step()).collect();
    Ok(ChainOutput {
        batches,
        burn_in: burn,
    })
}
