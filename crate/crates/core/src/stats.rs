//! Binomial-proportion estimates with Wilson score intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided standard normal quantile for a confidence level in (0,1).
pub fn normal_quantile(confidence: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + confidence / 2.0)
}

pub(crate) fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("confidence level must lie in (0,1), got {confidence}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub replicas: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl Estimate {
    /// Wilson score interval for `successes` out of `replicas`.
    pub fn wilson(successes: u64, replicas: u64, confidence: f64) -> Self {
        assert!(replicas > 0 && successes <= replicas);
        let n = replicas as f64;
        let point = successes as f64 / n;
        let z = normal_quantile(confidence);
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (point + z2 / (2.0 * n)) / denom;
        let half = z * (point * (1.0 - point) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        let ci_low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, point) };
        let ci_high = if successes == replicas { 1.0 } else { (center + half).clamp(point, 1.0) };
        Estimate { successes, replicas, point, ci_low, ci_high, confidence }
    }

    /// Degenerate estimate for an event known with certainty.
    pub fn exact(value: bool, replicas: u64, confidence: f64) -> Self {
        let v = if value { 1.0 } else { 0.0 };
        Estimate { successes: if value { replicas } else { 0 }, replicas, point: v, ci_low: v, ci_high: v, confidence }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// Complementary event.
    pub fn complement(&self) -> Self {
        Estimate {
            successes: self.replicas - self.successes,
            replicas: self.replicas,
            point: 1.0 - self.point,
            ci_low: 1.0 - self.ci_high,
            ci_high: 1.0 - self.ci_low,
            confidence: self.confidence,
        }
    }
}

/// Normal-approximation interval for the mean of a count bounded by
/// `max`, from per-replica sums of the count and of its square. When every
/// replica gave the same count the width falls back to the Wilson interval
/// of "count is nonzero", scaled by `max`.
pub fn mean_interval(sum: u64, sum_sq: u64, replicas: u64, max: u64, confidence: f64) -> (f64, f64, f64) {
    assert!(replicas > 0);
    let n = replicas as f64;
    let mean = sum as f64 / n;
    let var = if replicas > 1 { ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let top = max as f64;
    if var == 0.0 {
        let w = Estimate::wilson(0, replicas, confidence).ci_high * top;
        return (mean, (mean - w).max(0.0), (mean + w).min(top));
    }
    let half = normal_quantile(confidence) * (var / n).sqrt();
    (mean, (mean - half).max(0.0), (mean + half).min(top))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_quantile(0.99) - 2.575_829_303_548_901).abs() < 1e-9);
    }

    #[test]
    fn wilson_matches_hand_computation() {
        // 30 of 100 at 95%: center 0.3074, half 0.0885.
        let e = Estimate::wilson(30, 100, 0.95);
        assert!((e.ci_low - 0.2189).abs() < 1e-3, "{e:?}");
        assert!((e.ci_high - 0.3958).abs() < 1e-3, "{e:?}");
    }

    #[test]
    fn wilson_extremes_stay_ordered() {
        for (s, n) in [(0, 10), (10, 10), (1, 1_000_000), (999_999, 1_000_000)] {
            let e = Estimate::wilson(s, n, 0.99);
            assert!(e.ci_low <= e.point && e.point <= e.ci_high, "{e:?}");
            assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
        }
        let zero = Estimate::wilson(0, 100, 0.95);
        assert_eq!(zero.ci_low, 0.0);
        assert!(zero.ci_high > 0.0);
    }

    #[test]
    fn mean_interval_hand_computation() {
        // Counts 0,1,2,3 once each: mean 1.5, sample variance 5/3.
        let (m, lo, hi) = mean_interval(6, 14, 4, 3, 0.95);
        let half = 1.959_963_984_540_054 * (5.0f64 / 3.0 / 4.0).sqrt();
        assert_eq!(m, 1.5);
        assert!((lo - (1.5 - half)).abs() < 1e-12);
        assert!((hi - (1.5 + half)).abs() < 1e-12);
        let (m, lo, hi) = mean_interval(0, 0, 1000, 4, 0.95);
        assert_eq!((m, lo), (0.0, 0.0));
        assert!(hi > 0.0 && hi < 0.02);
    }
}
