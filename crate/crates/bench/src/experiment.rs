//! Replicated-chain campaigns.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use rehmc_core::adapt::{adapt_step_size, CovarianceAccumulator, CovarianceMode};
use rehmc_core::estimators::{
    ess_from_mse, esjd_tune, gaussian_iid_mse, iid_mse_oracle, mse, pca_metrics, Statistic, WeightedSampleSet,
};
use rehmc_core::linalg::Matrix;
use rehmc_core::targets::Gaussian;
use rehmc_core::{Chain, ChainStreams, KernelSpec, MassMatrix, PhasePoint, TargetDensity};

use crate::config::{ExperimentConfig, PathConfig, SamplerConfig, StatisticConfig, StepSizeConfig};
use crate::error::{BenchError, Result};
use crate::model::Model;
use crate::reference::{pool_draw, run_reference_chain, Reference};
use crate::report::{ArmSummary, EssReport, ReportRow, SweepReport, SweepRow};
use crate::seeds;

pub const PLAIN: &str = "plain";
pub const RECYCLED: &str = "recycled";

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::config(format!("cannot start {workers} workers: {e}")))
}

/// Where stationary starting points and ground truth come from.
pub enum Truth {
    Gaussian(Gaussian),
    Reference(Reference),
}

impl Truth {
    pub fn value(&self, param: usize, stat: Statistic) -> f64 {
        match self {
            Truth::Gaussian(g) => stat.gaussian_truth(0.0, g.variances()[param]),
            Truth::Reference(r) => r.value(param, stat).expect("reference covers every statistic"),
        }
    }

    pub fn draw(&self, streams: &mut ChainStreams) -> Vec<f64> {
        match self {
            Truth::Gaussian(g) => g.sample(&mut streams.init),
            Truth::Reference(r) => pool_draw(&r.pool, &mut streams.init),
        }
    }
}

/// Everything a campaign needs before its chains start.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub model: Model,
    pub truth: Truth,
    pub step_size: f64,
    /// Integration time chosen for jittered paths.
    pub tau: Option<f64>,
}

impl Resolved {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = Model::build(&config.target)?;
        let truth = match model.as_gaussian() {
            Some(g) => Truth::Gaussian(g.clone()),
            None => {
                let extra: Vec<Statistic> = config.statistics.iter().filter_map(StatisticConfig::scalar).collect();
                let theta0 = vec![0.0; model.dim()];
                Truth::Reference(run_reference_chain(&model, theta0, config.reference_length, config.seed, &extra)?)
            }
        };
        let mut r = Self {
            config: config.clone(),
            model,
            truth,
            step_size: 0.0,
            tau: None,
        };
        r.resolve_tuning()?;
        Ok(r)
    }

    fn resolve_tuning(&mut self) -> Result<()> {
        let c = &self.config;
        let pilot_tau = match &c.sampler {
            SamplerConfig::Hmc {
                path: PathConfig::Jitter { tau, .. },
                ..
            } => Some(*tau),
            SamplerConfig::Hmc {
                path: PathConfig::EsjdAuto { grid, .. },
                ..
            } => {
                let mut g = grid.clone();
                g.sort_by(f64::total_cmp);
                Some(g[g.len() / 2])
            }
            _ => None,
        };
        let mass = MassMatrix::identity(self.model.dim());
        self.step_size = match c.step_size {
            StepSizeConfig::Fixed { value } => value,
            StepSizeConfig::Auto { delta, iterations } => {
                let spec = c.kernel(pilot_tau.unwrap_or(1.0))?;
                let mut s = ChainStreams::new(c.seed, seeds::PILOT);
                let theta0 = self.truth.draw(&mut s);
                adapt_step_size(&self.model, theta0, &spec, &mass, iterations, delta, &mut s)?.0
            }
        };
        self.tau = match &c.sampler {
            SamplerConfig::Hmc {
                path: PathConfig::EsjdAuto { grid, probes, .. },
                ..
            } => {
                let mut s = ChainStreams::new(c.seed, seeds::ESJD);
                let d = self.model.dim();
                let starts = (0..*probes)
                    .map(|_| PhasePoint::new(self.truth.draw(&mut s), vec![0.0; d], &self.model, &mass))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(esjd_tune(&self.model, self.step_size, &mass, grid, &starts, &s)?)
            }
            _ => pilot_tau,
        };
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        self.config.kernel(self.tau.unwrap_or(1.0))
    }

    pub fn scalar_statistics(&self) -> Vec<Statistic> {
        self.config.statistics.iter().filter_map(StatisticConfig::scalar).collect()
    }
}

/// Per-chain estimates and bookkeeping.
#[derive(Clone, Debug)]
pub struct ChainSummary {
    /// `estimates[s][i]`: statistic `s` on coordinate `i`.
    pub estimates: Vec<Vec<f64>>,
    /// Top eigenvalue and angle to the leading true span.
    pub pca: Option<(f64, f64)>,
    pub divergences: usize,
    pub iterations: usize,
    pub grad_evals: usize,
    pub recycled_draws: usize,
}

/// Per-coordinate weighted draws of one chain, reduced to statistics.
struct Collector {
    sets: Vec<WeightedSampleSet>,
    cov: Option<CovarianceAccumulator>,
}

impl Collector {
    fn new(dim: usize, pca: bool) -> Self {
        Self {
            sets: (0..dim).map(|_| WeightedSampleSet::new()).collect(),
            cov: pca.then(|| CovarianceAccumulator::new(dim, CovarianceMode::Dense)),
        }
    }

    fn push(&mut self, x: &[f64], w: f64) -> Result<()> {
        for (s, v) in self.sets.iter_mut().zip(x) {
            s.push(*v, w);
        }
        if let Some(c) = &mut self.cov {
            c.update(x, w)?;
        }
        Ok(())
    }

    fn finish(self, stats: &[Statistic], eigen: Option<&(Vec<f64>, Matrix)>) -> Result<(Vec<Vec<f64>>, Option<(f64, f64)>)> {
        let estimates = stats
            .iter()
            .map(|st| self.sets.iter().map(|s| st.estimate(s)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let pca = match (self.cov, eigen) {
            (Some(c), Some((vals, vecs))) => {
                let m = pca_metrics(&c.covariance(), vals, vecs)?;
                Some((m.top_eigenvalue, m.angle))
            }
            _ => None,
        };
        Ok((estimates, pca))
    }
}

/// Runs one chain from a stationary start and reduces it.
pub fn run_summarized_chain(
    r: &Resolved,
    spec: KernelSpec,
    mass: MassMatrix,
    eps: f64,
    chain: u64,
    stop: Stop,
) -> Result<ChainSummary> {
    let mut streams = ChainStreams::new(r.config.seed, chain);
    let theta0 = r.truth.draw(&mut streams);
    let mut c = Chain::new(&r.model, theta0, spec, eps, mass, streams)?;
    for _ in 0..r.config.burn_in {
        c.step();
    }
    let stats = r.scalar_statistics();
    let eigen = match (&r.truth, r.config.has_pca()) {
        (Truth::Gaussian(g), true) => Some(g.eigen()),
        _ => None,
    };
    let mut col = Collector::new(r.model.dim(), eigen.is_some());
    let mut out = ChainSummary {
        estimates: Vec::new(),
        pca: None,
        divergences: 0,
        iterations: 0,
        grad_evals: 0,
        recycled_draws: 0,
    };
    loop {
        match stop {
            Stop::Iterations(n) if out.iterations >= n => break,
            _ => {}
        }
        let b = c.step();
        if let Stop::GradientBudget(budget) = stop {
            if out.grad_evals + b.diagnostics.grad_evals > budget {
                break;
            }
        }
        out.iterations += 1;
        out.grad_evals += b.diagnostics.grad_evals;
        out.divergences += usize::from(b.diagnostics.divergent);
        out.recycled_draws += b.recycled.len();
        for (x, w) in spec.estimator_draws(&b) {
            col.push(x, w)?;
        }
    }
    if out.iterations == 0 {
        return Err(BenchError::config("gradient budget is smaller than one iteration"));
    }
    let (estimates, pca) = col.finish(&stats, eigen.as_ref())?;
    out.estimates = estimates;
    out.pca = pca;
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub enum Stop {
    Iterations(usize),
    /// Stop before the iteration that would exceed this many gradient
    /// evaluations.
    GradientBudget(usize),
}

/// iid reference MSE for each scalar statistic and coordinate at sample
/// size `n`, and for the PCA metrics when requested.
pub struct IidMse {
    pub scalar: Vec<Vec<f64>>,
    pub pca: Option<(f64, f64)>,
}

pub fn iid_mse(r: &Resolved, n: usize) -> Result<IidMse> {
    let stats = r.scalar_statistics();
    let d = r.model.dim();
    let reps = r.config.iid_replications;
    let mut s = ChainStreams::new(r.config.seed, seeds::IID);
    let scalar = match &r.truth {
        Truth::Gaussian(g) => {
            let std_normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
            stats
                .iter()
                .map(|st| {
                    let unit = match st {
                        Statistic::Quantile(_) => {
                            let truth = st.gaussian_truth(0.0, 1.0);
                            iid_mse_oracle(*st, truth, n, reps, std_normal, &mut s.init)?
                        }
                        _ => gaussian_iid_mse(*st, 1.0, n),
                    };
                    Ok(g.variances()
                        .iter()
                        .map(|v| match st {
                            Statistic::Variance => unit * v * v,
                            _ => unit * v,
                        })
                        .collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?
        }
        Truth::Reference(reference) => stats
            .iter()
            .map(|st| {
                (0..d)
                    .map(|i| {
                        let truth = r.truth.value(i, *st);
                        let pool = &reference.pool;
                        let sampler = |rng: &mut ChaCha8Rng| pool[rng.random_range(0..pool.len())][i];
                        Ok(iid_mse_oracle(*st, truth, n, reps, sampler, &mut s.init)?)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let pca = match (&r.truth, r.config.has_pca()) {
        (Truth::Gaussian(g), true) => {
            let (vals, vecs) = g.eigen();
            let reps = reps.clamp(2, 200);
            let mut sq = (0.0, 0.0);
            for _ in 0..reps {
                let mut acc = CovarianceAccumulator::new(d, CovarianceMode::Dense);
                for _ in 0..n {
                    acc.update(&g.sample(&mut s.init), 1.0)?;
                }
                let m = pca_metrics(&acc.covariance(), &vals, &vecs)?;
                sq.0 += (m.top_eigenvalue - vals[0]).powi(2);
                sq.1 += m.angle * m.angle;
            }
            Some((sq.0 / reps as f64, sq.1 / reps as f64))
        }
        _ => None,
    };
    Ok(IidMse { scalar, pca })
}

/// Chains of one arm, run on the pool in chain order.
pub fn run_arm(
    pool: &ThreadPool,
    r: &Resolved,
    spec: KernelSpec,
    arm: u64,
) -> Result<Vec<ChainSummary>> {
    let mass = MassMatrix::identity(r.model.dim());
    pool.install(|| {
        (0..r.config.chains)
            .into_par_iter()
            .map(|c| {
                run_summarized_chain(
                    r,
                    spec,
                    mass.clone(),
                    r.step_size,
                    seeds::arm_chain(arm, c),
                    Stop::Iterations(r.config.iterations),
                )
            })
            .collect()
    })
}

/// MSE across chains per (statistic, coordinate), followed by the PCA
/// metrics when present.
pub struct ArmMse {
    pub scalar: Vec<Vec<f64>>,
    pub pca: Option<(f64, f64)>,
}

pub fn arm_mse(r: &Resolved, chains: &[ChainSummary]) -> Result<ArmMse> {
    let stats = r.scalar_statistics();
    let d = r.model.dim();
    let scalar = stats
        .iter()
        .enumerate()
        .map(|(si, st)| {
            (0..d)
                .map(|i| {
                    let est: Vec<f64> = chains.iter().map(|c| c.estimates[si][i]).collect();
                    Ok(mse(&est, r.truth.value(i, *st))?)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let pca = match &r.truth {
        Truth::Gaussian(g) if r.config.has_pca() => {
            let top = g.eigen().0[0];
            let vals: Vec<(f64, f64)> = chains.iter().filter_map(|c| c.pca).collect();
            let ev: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let angle: Vec<f64> = vals.iter().map(|v| v.1).collect();
            Some((mse(&ev, top)?, mse(&angle, 0.0)?))
        }
        _ => None,
    };
    Ok(ArmMse { scalar, pca })
}

pub fn arm_summary(name: &str, chains: &[ChainSummary]) -> ArmSummary {
    let n = chains.len() as f64;
    let iters: usize = chains.iter().map(|c| c.iterations).sum();
    ArmSummary {
        arm: name.to_owned(),
        divergence_rate: chains.iter().map(|c| c.divergences).sum::<usize>() as f64 / iters as f64,
        mean_grad_evals: chains.iter().map(|c| c.grad_evals).sum::<usize>() as f64 / n,
        mean_iterations: iters as f64 / n,
        recycled_per_iteration: chains.iter().map(|c| c.recycled_draws).sum::<usize>() as f64 / iters as f64,
    }
}

/// Aborts when `arms.last()` diverged too often; the error carries every
/// arm summary gathered so far.
fn check_divergence(config: &ExperimentConfig, arms: &[ArmSummary]) -> Result<()> {
    let arm = arms.last().expect("at least one arm");
    if arm.divergence_rate > config.max_divergence_rate {
        return Err(BenchError::Divergence {
            arm: arm.arm.clone(),
            rate: arm.divergence_rate,
            limit: config.max_divergence_rate,
            arms: arms.to_vec(),
        });
    }
    Ok(())
}

/// Report rows for one arm against the plain arm's ESS.
fn rows_for(
    r: &Resolved,
    arm: &str,
    m: &ArmMse,
    iid: &IidMse,
    n: usize,
    plain_ess: Option<&[f64]>,
) -> Result<Vec<ReportRow>> {
    let stats = r.scalar_statistics();
    let mut cells: Vec<(usize, String, f64, f64)> = Vec::new();
    for i in 0..r.model.dim() {
        for (si, st) in stats.iter().enumerate() {
            cells.push((i, st.label(), m.scalar[si][i], iid.scalar[si][i]));
        }
    }
    if let (Some(p), Some(q)) = (m.pca, iid.pca) {
        cells.push((0, "pca_eigenvalue".into(), p.0, q.0));
        cells.push((0, "pca_angle".into(), p.1, q.1));
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(k, (param_index, statistic, mse, iid_mse))| {
            let ess = ess_from_mse(mse, iid_mse, n)?;
            let ratio = plain_ess.map_or(1.0, |p| ess / p[k]);
            Ok(ReportRow {
                param_index,
                statistic,
                arm: arm.to_owned(),
                mse,
                ess,
                ess_ratio: ratio,
                log2_ratio: ratio.log2(),
            })
        })
        .collect()
}

fn ess_column(rows: &[ReportRow]) -> Vec<f64> {
    rows.iter().map(|r| r.ess).collect()
}

/// Plain and recycled arms on independent streams, MSE across chains and
/// ESS ratios (recycled over plain).
pub fn run_experiment(config: &ExperimentConfig, pool: &ThreadPool) -> Result<EssReport> {
    config.validate_for_report()?;
    let r = Resolved::new(config)?;
    let spec = r.kernel()?;
    let iid = iid_mse(&r, config.iterations)?;
    let mut rows = Vec::new();
    let mut arms = Vec::new();
    let mut plain_ess = None;
    // A kernel without recycling makes the comparison a self-comparison on
    // shared streams.
    let recycled_arm = if spec.is_recycling() { 1 } else { 0 };
    for (arm_id, name, kernel) in [(0, PLAIN, spec.without_recycling()), (recycled_arm, RECYCLED, spec)] {
        let chains = run_arm(pool, &r, kernel, arm_id)?;
        arms.push(arm_summary(name, &chains));
        check_divergence(config, &arms)?;
        let m = arm_mse(&r, &chains)?;
        let arm_rows = rows_for(&r, name, &m, &iid, config.iterations, plain_ess.as_deref())?;
        if plain_ess.is_none() {
            plain_ess = Some(ess_column(&arm_rows));
        }
        rows.extend(arm_rows);
    }
    Ok(EssReport {
        rows,
        arms,
        step_size: r.step_size,
        tau: r.tau,
    })
}

/// One report per recycle count plus full recycling, all compared to a
/// shared plain arm, and the smallest count whose mean ESS is within 5% of
/// full recycling.
pub fn run_recycle_count_sweep(config: &ExperimentConfig, pool: &ThreadPool) -> Result<SweepReport> {
    config.validate_for_sweep()?;
    let full = config.with_full_recycling();
    let r = Resolved::new(&full)?;
    let iid = iid_mse(&r, config.iterations)?;

    let plain = run_arm(pool, &r, r.kernel()?.without_recycling(), 0)?;
    let plain_summary = arm_summary(PLAIN, &plain);
    check_divergence(config, std::slice::from_ref(&plain_summary))?;
    let plain_rows = rows_for(&r, PLAIN, &arm_mse(&r, &plain)?, &iid, config.iterations, None)?;
    let plain_ess = ess_column(&plain_rows);

    let mut variants: Vec<(String, Option<usize>, KernelSpec)> = vec![("all".into(), None, r.kernel()?)];
    for &k in &config.sweep {
        let c = config.with_recycle_count(k)?;
        variants.push((format!("k{k}"), Some(k), c.kernel(r.tau.unwrap_or(1.0))?));
    }

    let mut reports = Vec::new();
    let mut summary = Vec::new();
    for (i, (name, k, spec)) in variants.into_iter().enumerate() {
        let chains = run_arm(pool, &r, spec, 0x10 + i as u64)?;
        let arm = arm_summary(&name, &chains);
        check_divergence(config, &[plain_summary.clone(), arm.clone()])?;
        let rows = rows_for(&r, &name, &arm_mse(&r, &chains)?, &iid, config.iterations, Some(&plain_ess))?;
        let n = rows.len() as f64;
        summary.push(SweepRow {
            arm: name.clone(),
            k,
            mean_ess: rows.iter().map(|r| r.ess).sum::<f64>() / n,
            mean_ess_ratio: rows.iter().map(|r| r.ess_ratio).sum::<f64>() / n,
            mean_log2_ratio: rows.iter().map(|r| r.log2_ratio).sum::<f64>() / n,
            recycled_per_iteration: arm.recycled_per_iteration,
            saturated: k.is_some_and(|k| arm.recycled_per_iteration < k as f64 - 1e-9),
            within_5pct: false,
        });
        let mut all_rows = plain_rows.clone();
        all_rows.extend(rows);
        reports.push((
            name,
            EssReport {
                rows: all_rows,
                arms: vec![plain_summary.clone(), arm],
                step_size: r.step_size,
                tau: r.tau,
            },
        ));
    }
    let full_ess = summary[0].mean_ess;
    for row in summary.iter_mut().skip(1) {
        row.within_5pct = row.mean_ess >= 0.95 * full_ess;
    }
    let smallest = summary.iter().filter(|s| s.within_5pct).filter_map(|s| s.k).min();
    Ok(SweepReport {
        summary,
        reports,
        smallest_within_5pct: smallest,
    })
}

/// Single chain with its full draw record, for the `sample` subcommand.
pub fn sample_chain(config: &ExperimentConfig) -> Result<(Resolved, Vec<rehmc_core::IterationBatch>)> {
    let r = Resolved::new(config)?;
    let spec = r.kernel()?;
    let mut streams = ChainStreams::new(config.seed, seeds::arm_chain(1, 0));
    let theta0 = r.truth.draw(&mut streams);
    let mass = MassMatrix::identity(r.model.dim());
    let batches = {
        let mut c = Chain::new(&r.model, theta0, spec, r.step_size, mass, streams)?;
        for _ in 0..config.burn_in {
            c.step();
        }
        (0..config.iterations).map(|_| c.step()).collect()
    };
    Ok((r, batches))
}

#[derive(Serialize)]
pub struct Provenance<'a> {
    pub config: &'a ExperimentConfig,
    pub step_size: f64,
    pub tau: Option<f64>,
    pub crate_version: &'static str,
}
