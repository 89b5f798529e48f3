//! Standard normal helpers shared by the Wald intervals and the product test.

use statrs::distribution::{ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal parameters are valid")
}

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Quantile of the standard normal distribution, `p` in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Two-sided p-value `2 (1 - Phi(|z|))`, evaluated through the lower tail so
/// that large statistics keep their precision.
pub fn two_sided_p_value(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * standard_normal().cdf(-z.abs())).min(1.0)
}

/// Critical value `q_{1 - alpha/2}` of a two-sided level-`alpha` test.
pub fn two_sided_critical_value(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn critical_value_at_five_percent() {
        assert_abs_diff_eq!(two_sided_critical_value(0.05), 1.959_963_984_540_054, epsilon = 1e-9);
    }

    #[test]
    fn p_value_is_one_at_zero_and_symmetric() {
        assert_abs_diff_eq!(two_sided_p_value(0.0), 1.0, epsilon = 1e-15);
        assert_eq!(two_sided_p_value(1.3), two_sided_p_value(-1.3));
        assert!(two_sided_p_value(40.0) >= 0.0);
    }

    #[test]
    fn expit_is_stable_in_both_tails() {
        assert_eq!(expit(0.0), 0.5);
        assert!(expit(-800.0) >= 0.0 && expit(-800.0) < 1e-300);
        assert_eq!(expit(800.0), 1.0);
    }
}
