#![allow(dead_code)]

/// Two-sided standard normal critical value at level 0.001.
pub const Z_0001_TWO_SIDED: f64 = 3.290_526_731_491_925_5;
/// Chi-square 0.999 quantiles by degrees of freedom.
pub const CHI2_999_DF2: f64 = 13.815_510_557_964_274;
pub const CHI2_999_DF7: f64 = 24.321_886_347_856_854;
pub const CHI2_999_DF12: f64 = 32.909_490_407_360_21;
/// Asymptotic Kolmogorov critical value at level 0.001, times `√n`.
pub const KS_0001: f64 = 1.949_474_603_504_375_3;

/// Ratio estimate `Σ w f / Σ w` per batch of consecutive units and the
/// standard error of their mean.
pub fn batch_estimate(units: &[(f64, f64)], batches: usize) -> (f64, f64) {
    let size = units.len() / batches;
    let est: Vec<f64> = units
        .chunks(size)
        .take(batches)
        .map(|c| {
            let (num, den) = c.iter().fold((0.0, 0.0), |a, u| (a.0 + u.0, a.1 + u.1));
            num / den
        })
        .collect();
    mean_se(&est)
}

/// Mean and standard error of independent replicates.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn chi_square(counts: &[usize], expected: &[f64]) -> f64 {
    counts
        .iter()
        .zip(expected)
        .map(|(c, e)| (*c as f64 - e) * (*c as f64 - e) / e)
        .sum()
}

/// Kolmogorov–Smirnov distance of `x` against Uniform(0, 1).
pub fn ks_uniform(x: &mut [f64]) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let lo = v - i as f64 / n;
            let hi = (i as f64 + 1.0) / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
