//! Mass-matrix tuning with and without recycled draws.

use rayon::prelude::*;
use rayon::ThreadPool;

use rehmc_core::adapt::{tuning_schedule, TuningOptions};
use rehmc_core::estimators::ess_from_mse;
use rehmc_core::ChainStreams;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::experiment::{arm_mse, iid_mse, run_summarized_chain, Resolved, Stop, Truth, PLAIN, RECYCLED};
use crate::report::{TuningReport, TuningRow};
use crate::seeds;

/// Paired replications: both arms share the initial state and every random
/// stream, so the tuned mass matrices differ only through the recycled
/// draws fed to the covariance estimate. After warmup both arms run plain
/// chains from stationary starts under the same gradient budget.
pub fn run_tuning_comparison(config: &ExperimentConfig, pool: &ThreadPool) -> Result<TuningReport> {
    config.validate_for_tuning()?;
    let t = config.tuning.clone().expect("validated");
    if t.replications > 1 << 16 || config.chains > 1 << 16 {
        return Err(BenchError::config("at most 65536 replications and chains"));
    }
    let r = Resolved::new(config)?;
    let spec = r.kernel()?;
    let options = TuningOptions {
        delta: t.delta,
        ..TuningOptions::default()
    };
    let true_cov = match &r.truth {
        Truth::Gaussian(g) => Some(g.covariance()),
        Truth::Reference(_) => None,
    };

    let per_rep: Vec<Vec<TuningRow>> = pool.install(|| {
        (0..t.replications)
            .into_par_iter()
            .map(|rep| {
                let mut base = ChainStreams::new(config.seed, seeds::TUNING | rep as u64);
                let theta0 = r.truth.draw(&mut base);
                [(PLAIN, false), (RECYCLED, true)]
                    .into_iter()
                    .map(|(arm, use_recycling)| {
                        let mut s = base.clone();
                        let tuned =
                            tuning_schedule(&r.model, theta0.clone(), &spec, t.n_adap, use_recycling, &options, &mut s)?;
                        let plain = spec.without_recycling();
                        let chains = (0..config.chains)
                            .map(|c| {
                                run_summarized_chain(
                                    &r,
                                    plain,
                                    tuned.mass.clone(),
                                    tuned.step_size,
                                    seeds::tuned_chain(rep, c),
                                    Stop::GradientBudget(t.gradient_budget),
                                )
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let n_mean = chains.iter().map(|c| c.iterations).sum::<usize>() as f64 / chains.len() as f64;
                        let n = n_mean.round().max(1.0) as usize;
                        let m = arm_mse(&r, &chains)?;
                        let iid = iid_mse(&r, n)?;
                        let ess: Vec<f64> = m
                            .scalar
                            .iter()
                            .flatten()
                            .zip(iid.scalar.iter().flatten())
                            .map(|(chain, iid)| ess_from_mse(*chain, *iid, n))
                            .collect::<Result<_, _>>()?;
                        Ok(TuningRow {
                            replication: rep,
                            arm: arm.to_owned(),
                            step_size: tuned.step_size,
                            covariance_error: true_cov.as_ref().map(|c| tuned.covariance.frobenius_distance(c)),
                            warmup_grad_evals: tuned.grad_evals,
                            mean_grad_evals: chains.iter().map(|c| c.grad_evals).sum::<usize>() as f64
                                / chains.len() as f64,
                            mean_iterations: n_mean,
                            mean_ess: ess.iter().sum::<f64>() / ess.len() as f64,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let wins = per_rep.iter().filter(|p| p[1].mean_ess > p[0].mean_ess).count();
    Ok(TuningReport {
        recycled_win_fraction: wins as f64 / per_rep.len() as f64,
        rows: per_rep.into_iter().flatten().collect(),
    })
}
