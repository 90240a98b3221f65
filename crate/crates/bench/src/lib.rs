//! Replicated-chain campaigns for the samplers in `rehmc-core`: ESS
//! comparisons with and without recycling, recycle-count sweeps, mass
//! matrix tuning comparisons and long reference chains, plus the CSV and
//! JSON formats they read and write.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod reference;
pub mod report;
pub mod seeds;
pub mod tuning;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, run_recycle_count_sweep, sample_chain, thread_pool};
pub use reference::run_reference_chain;
pub use report::{EssReport, SweepReport, TuningReport};
pub use tuning::run_tuning_comparison;
