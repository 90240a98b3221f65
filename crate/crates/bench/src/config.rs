//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rehmc_core::estimators::Statistic;
use rehmc_core::{HmcRecycling, KernelSpec, PathLength, RecycleMode, RecycleStrategy, SubsetScheme, WindowDraws};

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    GaussianIid {
        dim: usize,
    },
    GaussianDiagonal {
        variances: Vec<f64>,
    },
    /// Standard deviations `1, 2, …, dim`.
    GaussianScaled {
        dim: usize,
    },
    GaussianDense {
        covariance: Vec<Vec<f64>>,
    },
    /// Equicorrelated covariance `(1 − ρ)I + ρ11ᵀ`.
    GaussianEquicorrelated {
        dim: usize,
        rho: f64,
    },
    Logistic {
        data: PathBuf,
        #[serde(default)]
        sigma_prior: SigmaPriorConfig,
    },
    StochasticVolatility {
        data: PathBuf,
        #[serde(default = "default_s0_mean")]
        s0_mean: f64,
        #[serde(default = "default_half")]
        tau_shape: f64,
        #[serde(default = "default_half")]
        tau_rate: f64,
    },
    LogGamma {
        shape: f64,
        #[serde(default = "default_one")]
        rate: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaPriorConfig {
    #[default]
    Flat,
    Exponential {
        rate: f64,
    },
}

fn default_s0_mean() -> f64 {
    0.1
}
fn default_half() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    Fixed {
        steps: usize,
    },
    Uniform {
        min: usize,
        max: usize,
    },
    /// Integration time uniform on `[lo·τ, hi·τ]`.
    Jitter {
        tau: f64,
        #[serde(default = "default_half")]
        lo: f64,
        #[serde(default = "default_one")]
        hi: f64,
    },
    /// `τ` chosen from `grid` by normalized jumping distance, then jittered
    /// as above.
    EsjdAuto {
        grid: Vec<f64>,
        #[serde(default = "default_half")]
        lo: f64,
        #[serde(default = "default_one")]
        hi: f64,
        #[serde(default = "default_probes")]
        probes: usize,
    },
}

fn default_probes() -> usize {
    200
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubsetConfig {
    All,
    Random { m: usize },
    Strided { log2_stride: u32 },
}

impl From<SubsetConfig> for SubsetScheme {
    fn from(s: SubsetConfig) -> Self {
        match s {
            SubsetConfig::All => SubsetScheme::All,
            SubsetConfig::Random { m } => SubsetScheme::Random { m },
            SubsetConfig::Strided { log2_stride } => SubsetScheme::Strided { log2_stride },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmcModeConfig {
    #[default]
    EndpointOnly,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NutsRecycleConfig {
    /// No recycling: both arms run the same kernel.
    None,
    Simple { k: usize },
    RaoBlackwell,
    EvenlySpread { k: usize },
    AllLeaves,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    Hmc {
        path: PathConfig,
        #[serde(default)]
        mode: HmcModeConfig,
        #[serde(default = "default_subset")]
        subset: SubsetConfig,
    },
    Nuts {
        #[serde(default = "default_depth")]
        max_depth: usize,
        recycle: NutsRecycleConfig,
    },
    Calderhead {
        window: usize,
        #[serde(default)]
        rao_blackwell: bool,
    },
}

fn default_subset() -> SubsetConfig {
    SubsetConfig::All
}
fn default_depth() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSizeConfig {
    Fixed {
        value: f64,
    },
    /// Dual averaging toward acceptance `delta` on a pilot chain.
    Auto {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_pilot")]
        iterations: usize,
    },
}

fn default_delta() -> f64 {
    0.7
}
fn default_pilot() -> usize {
    500
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatisticConfig {
    Mean,
    Variance,
    Quantile { q: f64 },
    Pca,
}

impl StatisticConfig {
    pub fn scalar(&self) -> Option<Statistic> {
        match *self {
            StatisticConfig::Mean => Some(Statistic::Mean),
            StatisticConfig::Variance => Some(Statistic::Variance),
            StatisticConfig::Quantile { q } => Some(Statistic::Quantile(q)),
            StatisticConfig::Pca => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    pub n_adap: usize,
    /// Post-warmup gradient evaluations per chain.
    #[serde(default = "default_budget")]
    pub gradient_budget: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_budget() -> usize {
    10_000
}
fn default_replications() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub sampler: SamplerConfig,
    pub step_size: StepSizeConfig,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_statistics")]
    pub statistics: Vec<StatisticConfig>,
    /// Largest-first recycle counts for the sweep.
    #[serde(default)]
    pub sweep: Vec<usize>,
    #[serde(default)]
    pub tuning: Option<TuningConfig>,
    /// Reference chain length for targets without analytic truths.
    #[serde(default = "default_reference_length")]
    pub reference_length: usize,
    /// Monte Carlo replications behind iid MSE values without a closed form.
    #[serde(default = "default_iid_replications")]
    pub iid_replications: usize,
    #[serde(default = "default_divergence_limit")]
    pub max_divergence_rate: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_chains() -> usize {
    200
}
fn default_iterations() -> usize {
    2000
}
fn default_statistics() -> Vec<StatisticConfig> {
    vec![
        StatisticConfig::Mean,
        StatisticConfig::Variance,
        StatisticConfig::Quantile { q: 0.975 },
    ]
}
fn default_reference_length() -> usize {
    100_000
}
fn default_iid_replications() -> usize {
    2000
}
fn default_divergence_limit() -> f64 {
    0.1
}

/// Smallest reference chain accepted.
pub const MIN_REFERENCE_LENGTH: usize = 10_000;

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(BenchError::config("iterations must be at least 1"));
        }
        if self.chains == 0 {
            return Err(BenchError::config("chains must be at least 1"));
        }
        if self.statistics.is_empty() {
            return Err(BenchError::config("at least one statistic is required"));
        }
        for s in &self.statistics {
            if let StatisticConfig::Quantile { q } = s {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(BenchError::config(format!("quantile level {q} outside (0, 1)")));
                }
            }
        }
        if !(self.max_divergence_rate >= 0.0 && self.max_divergence_rate <= 1.0) {
            return Err(BenchError::config("max_divergence_rate must lie in [0, 1]"));
        }
        match self.step_size {
            StepSizeConfig::Fixed { value } if !(value > 0.0 && value.is_finite()) => {
                return Err(BenchError::config("step size must be positive"));
            }
            StepSizeConfig::Auto { delta, .. } if !(delta > 0.0 && delta < 1.0) => {
                return Err(BenchError::config("target acceptance must lie in (0, 1)"));
            }
            _ => {}
        }
        if let SamplerConfig::Hmc { path, .. } = &self.sampler {
            match path {
                PathConfig::Jitter { tau, lo, hi } => check_jitter(&[*tau], *lo, *hi)?,
                PathConfig::EsjdAuto { grid, lo, hi, probes } => {
                    if grid.is_empty() || *probes == 0 {
                        return Err(BenchError::config("ESJD tuning needs a grid and probes"));
                    }
                    check_jitter(grid, *lo, *hi)?;
                }
                _ => {}
            }
        }
        self.kernel(1.0)?.validate()?;
        Ok(())
    }

    /// ESS reports compare MSE across chains and need two or more.
    pub fn validate_for_report(&self) -> Result<()> {
        self.validate()?;
        if self.chains < 2 {
            return Err(BenchError::config("ESS reports need at least 2 chains"));
        }
        Ok(())
    }

    pub fn validate_for_sweep(&self) -> Result<()> {
        self.validate_for_report()?;
        if self.sweep.len() < 2 {
            return Err(BenchError::config("a sweep needs at least two recycle counts"));
        }
        if self.sweep.windows(2).any(|w| w[1] == 0 || w[0] != 2 * w[1]) {
            return Err(BenchError::config("sweep counts must halve at each step"));
        }
        self.with_recycle_count(self.sweep[0])?;
        Ok(())
    }

    pub fn validate_for_tuning(&self) -> Result<()> {
        self.validate_for_report()?;
        let t = self
            .tuning
            .as_ref()
            .ok_or_else(|| BenchError::config("tune-compare needs a `tuning` section"))?;
        if t.replications == 0 || t.gradient_budget == 0 {
            return Err(BenchError::config("tuning replications and budget must be positive"));
        }
        if !(t.delta > 0.0 && t.delta < 1.0) {
            return Err(BenchError::config("target acceptance must lie in (0, 1)"));
        }
        match self.target {
            TargetConfig::Logistic { .. }
            | TargetConfig::GaussianIid { .. }
            | TargetConfig::GaussianDiagonal { .. }
            | TargetConfig::GaussianScaled { .. }
            | TargetConfig::GaussianDense { .. }
            | TargetConfig::GaussianEquicorrelated { .. } => Ok(()),
            _ => Err(BenchError::config("tune-compare supports Gaussian and logistic targets")),
        }
    }

    /// Kernel with recycling enabled, for a resolved integration time where
    /// the path is jittered.
    pub fn kernel(&self, tau: f64) -> Result<KernelSpec> {
        Ok(match &self.sampler {
            SamplerConfig::Hmc { path, mode, subset } => KernelSpec::Hmc {
                path: match *path {
                    PathConfig::Fixed { steps } => PathLength::Fixed(steps),
                    PathConfig::Uniform { min, max } => PathLength::Uniform { min, max },
                    PathConfig::Jitter { tau, lo, hi } => PathLength::TimeJitter {
                        tau_lo: lo * tau,
                        tau_hi: hi * tau,
                    },
                    PathConfig::EsjdAuto { lo, hi, .. } => PathLength::TimeJitter {
                        tau_lo: lo * tau,
                        tau_hi: hi * tau,
                    },
                },
                recycling: Some(HmcRecycling {
                    mode: match mode {
                        HmcModeConfig::EndpointOnly => RecycleMode::LOnly,
                        HmcModeConfig::Full => RecycleMode::FullK,
                    },
                    subset: (*subset).into(),
                    keep_momentum: false,
                }),
            },
            SamplerConfig::Nuts { max_depth, recycle } => KernelSpec::Nuts {
                max_depth: *max_depth,
                strategy: match *recycle {
                    NutsRecycleConfig::Simple { k } => RecycleStrategy::Simple(k),
                    NutsRecycleConfig::RaoBlackwell => RecycleStrategy::RaoBlackwell,
                    NutsRecycleConfig::EvenlySpread { k } => RecycleStrategy::EvenlySpread(k),
                    NutsRecycleConfig::AllLeaves => RecycleStrategy::AllLeaves,
                    NutsRecycleConfig::None => RecycleStrategy::None,
                },
            },
            SamplerConfig::Calderhead { window, rao_blackwell } => KernelSpec::Calderhead {
                window: *window,
                draws: if *rao_blackwell {
                    WindowDraws::RaoBlackwell
                } else {
                    WindowDraws::Sampled
                },
            },
        })
    }

    /// Copy with the per-iteration recycle count set to `k`: the reservoir
    /// size for NUTS, a random `k`-slot subset for HMC.
    pub fn with_recycle_count(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out.sampler {
            SamplerConfig::Nuts { recycle, .. } => match recycle {
                NutsRecycleConfig::Simple { k: kk } | NutsRecycleConfig::EvenlySpread { k: kk } => *kk = k,
                _ => return Err(BenchError::config("sweeps need a simple or evenly-spread NUTS strategy")),
            },
            SamplerConfig::Hmc { subset, .. } => *subset = SubsetConfig::Random { m: k },
            SamplerConfig::Calderhead { .. } => {
                return Err(BenchError::config("sweeps are defined for HMC and NUTS"))
            }
        }
        Ok(out)
    }

    /// Copy recycling every available draw: Rao-Blackwell NUTS, all-slot HMC.
    pub fn with_full_recycling(&self) -> Self {
        let mut out = self.clone();
        match &mut out.sampler {
            SamplerConfig::Nuts { recycle, .. } => *recycle = NutsRecycleConfig::RaoBlackwell,
            SamplerConfig::Hmc { subset, .. } => *subset = SubsetConfig::All,
            SamplerConfig::Calderhead { .. } => {}
        }
        out
    }

    pub fn has_pca(&self) -> bool {
        self.statistics.contains(&StatisticConfig::Pca)
    }
}

fn check_jitter(taus: &[f64], lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && lo <= hi) || taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(BenchError::config("jitter needs 0 < lo ≤ hi and positive τ"));
    }
    Ok(())
}
