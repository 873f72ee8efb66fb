use serde::{Deserialize, Serialize};

/// Two-quantile normal critical value for 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Mean and unbiased sample variance of a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// Sample variance with `n - 1` denominator; `NaN` when `n < 2`.
    pub variance: f64,
}

impl GroupStats {
    /// Two-pass mean and variance, summing in input order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return GroupStats {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n < 2 {
            f64::NAN
        } else {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        };
        GroupStats { n, mean, variance }
    }

    /// Squared standard error of the mean, `s^2 / n`.
    pub fn mean_var(&self) -> f64 {
        self.variance / self.n as f64
    }
}

/// Whether `estimate +- 1.96 se` contains `target`.
pub fn ci_covers(estimate: f64, se: f64, target: f64) -> bool {
    (estimate - target).abs() <= Z_95 * se
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_stats() {
        let s = GroupStats::from_values(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 2.0);
        assert_eq!(s.mean_var(), 1.0);
    }

    #[test]
    fn singleton_has_no_variance() {
        assert!(GroupStats::from_values(&[4.0]).variance.is_nan());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
