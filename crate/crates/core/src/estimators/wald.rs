use super::{EstimatorError, EstimatorOutput};
use crate::stats::{normal_quantile, two_sided_p_value};

/// Normal-theory interval and two-sided p-value for one estimate, with the
/// standard error taken from the influence values.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldInterval {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
    pub level: f64,
}

impl WaldInterval {
    /// Interval from a given estimate and standard error.
    pub fn from_parts(
        label: impl Into<String>,
        estimate: f64,
        std_error: f64,
        level: f64,
    ) -> Result<Self, EstimatorError> {
        if !(level > 0.0 && level < 1.0) {
            return Err(EstimatorError::InvalidLevel(level));
        }
        if !std_error.is_finite() || std_error <= 0.0 {
            return Err(EstimatorError::DegenerateVariance);
        }
        let q = normal_quantile(1.0 - (1.0 - level) / 2.0);
        Ok(Self {
            label: label.into(),
            estimate,
            std_error,
            lower: estimate - q * std_error,
            upper: estimate + q * std_error,
            p_value: two_sided_p_value(estimate / std_error),
            level,
        })
    }
}

/// `std_error = sqrt(mean(if^2) / n)`.
pub fn wald_interval(output: &EstimatorOutput, level: f64) -> Result<WaldInterval, EstimatorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimatorError::InvalidLevel(level));
    }
    let n = output.if_values.len() as f64;
    let mean_sq = output.if_values.iter().map(|v| v * v).sum::<f64>() / n;
    if mean_sq == 0.0 {
        return Err(EstimatorError::DegenerateVariance);
    }
    WaldInterval::from_parts(output.label.clone(), output.psi_hat, (mean_sq / n).sqrt(), level)
}
