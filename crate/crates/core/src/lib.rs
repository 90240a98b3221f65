//! Hamiltonian Monte Carlo kernels that recycle intermediate leapfrog
//! states as extra draws.
//!
//! Everything here is `no_std` with `alloc`. File formats, the command line
//! and parallel campaigns live in the companion `rehmc` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod baseline;
pub mod error;
pub mod estimators;
pub mod hmc;
pub mod integrator;
pub mod kernel;
pub mod linalg;
pub mod nuts;
pub mod phase;
pub mod special;
pub mod streams;
pub mod targets;

pub use error::{Error, Result, TargetError};
pub use hmc::{Diagnostics, HmcRecycling, IterationBatch, PathLength, RecycleMode, RecycledDraw, SubsetScheme};
pub use kernel::{run_chain, Chain, ChainOutput, KernelSpec, WindowDraws};
pub use linalg::Matrix;
pub use nuts::RecycleStrategy;
pub use phase::{MassMatrix, PhasePoint};
pub use streams::ChainStreams;
pub use targets::TargetDensity;
