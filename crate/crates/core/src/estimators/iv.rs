use super::{check_kind, EstimatorError, EstimatorOutput};
use crate::data::{validate_spec, DataError, ModelKind, ModelSpec, ObservationTable};

struct ArmMeans {
    mu: [f64; 2],
    pi: [f64; 2],
    zeta: f64,
}

fn arm_means(y: &[f64], a: &[f64], z: &[f64]) -> Result<ArmMeans, EstimatorError> {
    let mut count = [0usize; 2];
    let mut sum_y = [0.0; 2];
    let mut sum_a = [0.0; 2];
    for i in 0..y.len() {
        let arm = z[i] as usize;
        count[arm] += 1;
        sum_y[arm] += y[i];
        sum_a[arm] += a[i];
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(EstimatorError::InstrumentConstant);
    }
    let c = [count[0] as f64, count[1] as f64];
    Ok(ArmMeans {
        mu: [sum_y[0] / c[0], sum_y[1] / c[1]],
        pi: [sum_a[0] / c[0], sum_a[1] / c[1]],
        zeta: c[1] / (c[0] + c[1]),
    })
}

/// Wald ratio and its influence values at the empirical arm means:
/// `[(y - mu(z))(pi1 - pi0) - (a - pi(z))(mu1 - mu0)] (z/zeta - (1-z)/(1-zeta)) / (pi1 - pi0)^2`.
pub fn iv_contributions(y: &[f64], a: &[f64], z: &[f64]) -> Result<(f64, Vec<f64>), EstimatorError> {
    let m = arm_means(y, a, z)?;
    let d_pi = m.pi[1] - m.pi[0];
    if d_pi == 0.0 {
        return Err(EstimatorError::WeakInstrumentDegenerate);
    }
    let d_mu = m.mu[1] - m.mu[0];
    let psi = d_mu / d_pi;
    let values = (0..y.len())
        .map(|i| {
            let arm = z[i] as usize;
            let core = (y[i] - m.mu[arm]) * d_pi - (a[i] - m.pi[arm]) * d_mu;
            let weight = z[i] / m.zeta - (1.0 - z[i]) / (1.0 - m.zeta);
            core * weight / (d_pi * d_pi)
        })
        .collect();
    Ok((psi, values))
}

/// Unconditional IV Wald estimate from the instrument-arm means.
pub fn estimate_iv_wald(table: &ObservationTable, spec: &ModelSpec) -> Result<EstimatorOutput, EstimatorError> {
    check_kind(spec, ModelKind::Iv)?;
    validate_spec(table, spec)?;
    let z = table.instrument().ok_or(DataError::SpecRequiresInstrument)?;
    let (psi_hat, if_values) = iv_contributions(table.outcome(), table.treatment(), z)?;
    if if_values.iter().any(|v| !v.is_finite()) || !psi_hat.is_finite() {
        return Err(EstimatorError::NonFinite);
    }
    Ok(EstimatorOutput {
        label: spec.label(),
        psi_hat,
        if_values,
        nuisance_report: vec![("arm means mu(z), pi(z), zeta".to_string(), "empirical".to_string())],
    })
}
