use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Empirical 5th percentile.
    pub ci90_low: f64,
    /// Empirical 95th percentile.
    pub ci90_high: f64,
    pub sample_count: usize,
    /// Standard error of the mean (sample standard deviation over sqrt(n)).
    pub std_error: f64,
}

/// Mean, 90% interval from the 5th/95th percentiles, and standard error.
///
/// The interval is widened to contain the mean when a heavily skewed sample
/// would otherwise put the mean outside it.
pub fn summarize(samples: &[f64]) -> Result<SummaryStats> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let std_error = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(SummaryStats {
        mean,
        ci90_low: percentile_sorted(&sorted, 0.05).min(mean),
        ci90_high: percentile_sorted(&sorted, 0.95).max(mean),
        sample_count: n,
        std_error,
    })
}

/// Percentile with linear interpolation between order statistics at rank
/// `q * (n - 1)`. `sorted` must be non-empty and ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot take the median of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, 0.5))
}
