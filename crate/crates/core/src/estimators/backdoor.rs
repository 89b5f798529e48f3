use super::{check_kind, is_constant, AdjustmentBasis, EstimatorError, EstimatorOptions, EstimatorOutput};
use crate::data::{ModelKind, ModelSpec, ObservationTable};
use crate::nuisance::{fit_regression, Family};

/// Uncentered AIPW contributions
/// `(y - mu(a,c)) (a - pi(c)) / (pi(c)(1 - pi(c))) + mu(1,c) - mu(0,c)`
/// given fitted `pi`, `mu(1,c)` and `mu(0,c)` per row.
pub fn backdoor_contributions(y: &[f64], a: &[f64], pi: &[f64], mu1: &[f64], mu0: &[f64]) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let mu_a = if a[i] == 1.0 { mu1[i] } else { mu0[i] };
            let weight = (a[i] - pi[i]) / (pi[i] * (1.0 - pi[i]));
            (y[i] - mu_a) * weight + mu1[i] - mu0[i]
        })
        .collect()
}

pub fn estimate_backdoor_aipw(table: &ObservationTable, spec: &ModelSpec) -> Result<EstimatorOutput, EstimatorError> {
    estimate_backdoor_aipw_with(table, spec, &EstimatorOptions::default())
}

/// Backdoor AIPW estimate with `mu(a,c)` fit by least squares on `A` and the
/// expanded adjustment set, and `pi(c)` by logistic regression on the
/// expanded adjustment set.
pub fn estimate_backdoor_aipw_with(
    table: &ObservationTable,
    spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<EstimatorOutput, EstimatorError> {
    check_kind(spec, ModelKind::Backdoor)?;
    options.validate()?;
    let a = table.treatment();
    let y = table.outcome();
    if is_constant(a) {
        return Err(EstimatorError::AllTreatedOrAllControl);
    }

    let propensity_basis = AdjustmentBasis::new(table, spec, &[])?;
    let x_pi = propensity_basis.design(&[])?;
    let pi_fit = fit_regression(Family::Bernoulli, &x_pi, a, options.ridge)?;
    let pi = pi_fit.predict_design(&x_pi, options.propensity_clamp)?;

    let outcome_basis = AdjustmentBasis::new(table, spec, &[table.treatment_name()])?;
    let x_mu = outcome_basis.design(&[a])?;
    let mu_fit = fit_regression(Family::Gaussian, &x_mu, y, options.ridge)?;
    let n = table.n_rows();
    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let mu1 = mu_fit.predict_design(&outcome_basis.design(&[&ones])?, 0.0)?;
    let mu0 = mu_fit.predict_design(&outcome_basis.design(&[&zeros])?, 0.0)?;

    let contributions = backdoor_contributions(y, a, &pi, &mu1, &mu0);
    let basis = propensity_basis.spec_label.clone();
    EstimatorOutput::from_contributions(
        spec.label(),
        contributions,
        vec![
            ("propensity pi(c)".to_string(), basis.clone()),
            ("outcome mu(a,c)".to_string(), basis),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use approx::assert_abs_diff_eq;

    fn four_rows(y: Vec<f64>) -> ObservationTable {
        ObservationTable::new(
            Column::new("y", y),
            Column::new("a", vec![1.0, 1.0, 0.0, 0.0]),
            None,
            None,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn randomized_four_rows_give_two() {
        let t = four_rows(vec![2.0, 2.0, 0.0, 0.0]);
        let opts = EstimatorOptions {
            ridge: 0.0,
            ..Default::default()
        };
        let out = estimate_backdoor_aipw_with(&t, &ModelSpec::backdoor(Vec::<String>::new()), &opts).unwrap();
        assert_abs_diff_eq!(out.psi_hat, 2.0, epsilon = 1e-12);
        for v in &out.if_values {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_outcome_gives_zero() {
        let t = four_rows(vec![0.0; 4]);
        let out = estimate_backdoor_aipw(&t, &ModelSpec::backdoor(Vec::<String>::new())).unwrap();
        assert_eq!(out.psi_hat, 0.0);
        assert!(out.if_values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_treatment_is_an_error() {
        let t = ObservationTable::new(
            Column::new("y", vec![1.0, 2.0, 3.0]),
            Column::new("a", vec![1.0, 1.0, 1.0]),
            None,
            None,
            vec![],
        )
        .unwrap();
        assert_eq!(
            estimate_backdoor_aipw(&t, &ModelSpec::backdoor(Vec::<String>::new())).unwrap_err(),
            EstimatorError::AllTreatedOrAllControl
        );
    }

    #[test]
    fn contributions_by_hand() {
        // pi = 0.5, mu(1) = 2, mu(0) = 0: treated row with y = 3 gives
        // (3 - 2) * 0.5 / 0.25 + 2 = 4.
        let c = backdoor_contributions(&[3.0, -1.0], &[1.0, 0.0], &[0.5, 0.5], &[2.0, 2.0], &[0.0, 0.0]);
        assert_abs_diff_eq!(c[0], 4.0, epsilon = 1e-15);
        // control row: (-1 - 0) * (-0.5) / 0.25 + 2 = 4
        assert_abs_diff_eq!(c[1], 4.0, epsilon = 1e-15);
    }
}
