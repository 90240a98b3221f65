//! Report types and their on-disk layout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

/// One CSV row per (parameter, statistic, arm).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub param_index: usize,
    pub statistic: String,
    pub arm: String,
    pub mse: f64,
    pub ess: f64,
    /// ESS over the plain arm's ESS for the same cell.
    pub ess_ratio: f64,
    pub log2_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub divergence_rate: f64,
    pub mean_grad_evals: f64,
    pub mean_iterations: f64,
    pub recycled_per_iteration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EssReport {
    pub rows: Vec<ReportRow>,
    pub arms: Vec<ArmSummary>,
    pub step_size: f64,
    pub tau: Option<f64>,
}

impl EssReport {
    /// Mean log2 ESS ratio of `arm` over coordinates for one statistic.
    pub fn mean_log2_ratio(&self, arm: &str, statistic: &str) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.arm == arm && r.statistic == statistic)
            .map(|r| r.log2_ratio)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        io::create_dir(dir)?;
        io::write_csv(&dir.join(format!("{stem}.csv")), &self.rows)?;
        io::write_csv(&dir.join(format!("{stem}_arms.csv")), &self.arms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub arm: String,
    /// `None` for the full-recycling arm.
    pub k: Option<usize>,
    pub mean_ess: f64,
    pub mean_ess_ratio: f64,
    pub mean_log2_ratio: f64,
    pub recycled_per_iteration: f64,
    /// Fewer recycled draws per iteration than requested on average.
    pub saturated: bool,
    pub within_5pct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub summary: Vec<SweepRow>,
    pub reports: Vec<(String, EssReport)>,
    pub smallest_within_5pct: Option<usize>,
}

impl SweepReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::write_csv(&dir.join("sweep.csv"), &self.summary)?;
        for (name, r) in &self.reports {
            r.write(dir, &format!("report_{name}"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningRow {
    pub replication: usize,
    pub arm: String,
    pub step_size: f64,
    /// Frobenius distance between the tuned and true covariance, when known.
    pub covariance_error: Option<f64>,
    pub warmup_grad_evals: usize,
    pub mean_grad_evals: f64,
    pub mean_iterations: f64,
    pub mean_ess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningReport {
    pub rows: Vec<TuningRow>,
    /// Fraction of replications where the recycled-tuning arm has the
    /// larger mean ESS.
    pub recycled_win_fraction: f64,
}

impl TuningReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::write_csv(&dir.join("tune_compare.csv"), &self.rows)
    }
}
