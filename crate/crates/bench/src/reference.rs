//! Long reference chains standing in for analytic truths.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use rehmc_core::adapt::adapt_step_size;
use rehmc_core::estimators::{integrated_autocorrelation_time, Statistic, WeightedSampleSet};
use rehmc_core::targets::Gaussian;
use rehmc_core::{ChainStreams, KernelSpec, MassMatrix, RecycleStrategy, TargetDensity};

use crate::config::MIN_REFERENCE_LENGTH;
use crate::error::{BenchError, Result};
use crate::io;
use crate::seeds;

const WARMUP: usize = 1000;
const BATCHES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub param_index: usize,
    pub statistic: String,
    pub value: f64,
    /// Batch-means standard error.
    pub mc_se: f64,
}

#[derive(Clone, Debug)]
pub struct Reference {
    pub rows: Vec<ReferenceRow>,
    /// Draws thinned by the largest integrated autocorrelation time.
    pub pool: Vec<Vec<f64>>,
    pub autocorrelation_time: f64,
    pub step_size: f64,
}

/// Statistics every reference records.
pub fn reference_statistics(extra: &[Statistic]) -> Vec<Statistic> {
    let mut out = vec![
        Statistic::Mean,
        Statistic::Variance,
        Statistic::Quantile(0.025),
        Statistic::Quantile(0.5),
        Statistic::Quantile(0.975),
    ];
    for s in extra {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    out
}

impl Reference {
    pub fn value(&self, param: usize, stat: Statistic) -> Option<f64> {
        let label = stat.label();
        self.rows
            .iter()
            .find(|r| r.param_index == param && r.statistic == label)
            .map(|r| r.value)
    }

    /// Largest `|value − truth| / mc_se` against analytic Gaussian truths.
    pub fn max_gaussian_z(&self, g: &Gaussian) -> f64 {
        self.rows
            .iter()
            .filter_map(|r| {
                let stat = parse_statistic(&r.statistic)?;
                let truth = stat.gaussian_truth(0.0, g.variances()[r.param_index]);
                Some((r.value - truth).abs() / r.mc_se)
            })
            .fold(0.0, f64::max)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::write_csv(&dir.join("reference.csv"), &self.rows)?;
        let d = self.pool.first().map_or(0, Vec::len);
        let header: Vec<String> = (0..d).map(|i| format!("theta_{i}")).collect();
        let rows: Vec<Vec<String>> = self
            .pool
            .iter()
            .map(|x| x.iter().map(|v| v.to_string()).collect())
            .collect();
        io::write_table(&dir.join("reference_pool.csv"), &header, &rows)
    }
}

pub fn parse_statistic(label: &str) -> Option<Statistic> {
    match label {
        "mean" => Some(Statistic::Mean),
        "variance" => Some(Statistic::Variance),
        _ => label
            .strip_prefix("quantile_")
            .and_then(|q| q.parse().ok())
            .map(Statistic::Quantile),
    }
}

/// NUTS with dual-averaged step size, `WARMUP` discarded iterations and
/// `length` kept ones.
pub fn run_reference_chain<T: TargetDensity + Sync + ?Sized>(
    target: &T,
    theta0: Vec<f64>,
    length: usize,
    seed: u64,
    extra: &[Statistic],
) -> Result<Reference> {
    if length < MIN_REFERENCE_LENGTH {
        return Err(BenchError::config(format!(
            "reference chains need at least {MIN_REFERENCE_LENGTH} iterations"
        )));
    }
    let d = target.dim();
    let spec = KernelSpec::Nuts {
        max_depth: 10,
        strategy: RecycleStrategy::None,
    };
    let mass = MassMatrix::identity(d);
    let mut streams = ChainStreams::new(seed, seeds::REFERENCE);
    let (eps, state) = adapt_step_size(target, theta0, &spec, &mass, WARMUP, 0.8, &mut streams)?;
    let mut chain = rehmc_core::Chain::new(target, state.into_theta(), spec, eps, mass, streams)?;
    let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(length); d];
    for _ in 0..length {
        let b = chain.step();
        for (col, v) in draws.iter_mut().zip(b.next.theta()) {
            col.push(*v);
        }
    }

    let stats = reference_statistics(extra);
    let mut rows = Vec::new();
    let mut iat: f64 = 1.0;
    for (i, col) in draws.iter().enumerate() {
        iat = iat.max(integrated_autocorrelation_time(col)?);
        let full = WeightedSampleSet::unweighted(col.clone());
        let size = length / BATCHES;
        for stat in &stats {
            let value = stat.estimate(&full)?;
            let batch: Vec<f64> = col
                .chunks(size)
                .take(BATCHES)
                .map(|c| stat.estimate(&WeightedSampleSet::unweighted(c.to_vec())))
                .collect::<Result<_, _>>()?;
            let m = batch.iter().sum::<f64>() / BATCHES as f64;
            let var = batch.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / (BATCHES - 1) as f64;
            rows.push(ReferenceRow {
                param_index: i,
                statistic: stat.label(),
                value,
                mc_se: (var / BATCHES as f64).sqrt(),
            });
        }
    }
    let thin = iat.ceil() as usize;
    let pool = (0..length)
        .step_by(thin)
        .map(|t| draws.iter().map(|c| c[t]).collect())
        .collect();
    Ok(Reference {
        rows,
        pool,
        autocorrelation_time: iat,
        step_size: eps,
    })
}

/// Uniform draw from the thinned pool.
pub fn pool_draw<R: Rng + ?Sized>(pool: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    pool[rng.random_range(0..pool.len())].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rehmc_core::targets::{make_gaussian, GaussianSpec};

    #[test]
    fn labels_roundtrip() {
        for s in reference_statistics(&[Statistic::Quantile(0.3)]) {
            assert_eq!(parse_statistic(&s.label()), Some(s));
        }
        assert_eq!(parse_statistic("pca"), None);
    }

    #[test]
    fn short_reference_is_rejected() {
        let g = make_gaussian(GaussianSpec::IidStandard { dim: 1 }).unwrap();
        let e = run_reference_chain(&g, vec![0.0], 100, 0, &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn gaussian_reference_matches_truth() {
        let g = make_gaussian(GaussianSpec::Diagonal {
            variances: vec![1.0, 4.0],
        })
        .unwrap();
        let r = run_reference_chain(&g, vec![0.0, 0.0], 20_000, 3, &[]).unwrap();
        assert!(r.max_gaussian_z(&g) < 4.0, "{:?}", r.rows);
        assert!(!r.pool.is_empty());
    }
}
