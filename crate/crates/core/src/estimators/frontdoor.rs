use super::{check_kind, is_constant, AdjustmentBasis, EstimatorError, EstimatorOptions, EstimatorOutput};
use crate::data::{DataError, ModelKind, ModelSpec, ObservationTable};
use crate::nuisance::{fit_regression, Family};

/// Fitted nuisance values for one row, at every binary argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontDoorNuisances {
    /// `pi(c) = P(A = 1 | c)`.
    pub pi: f64,
    /// `alpha_one[a] = P(M = 1 | A = a, c)`.
    pub alpha_one: [f64; 2],
    /// `mu[m][a] = E(Y | M = m, A = a, c)`.
    pub mu: [[f64; 2]; 2],
}

impl FrontDoorNuisances {
    fn alpha(&self, m: usize, a: usize) -> f64 {
        if m == 1 {
            self.alpha_one[a]
        } else {
            1.0 - self.alpha_one[a]
        }
    }

    /// `gamma(m, c) = sum_a' mu(m, a', c) P(A = a' | c)`
    fn gamma(&self, m: usize) -> f64 {
        self.mu[m][1] * self.pi + self.mu[m][0] * (1.0 - self.pi)
    }

    /// `eta(a0, a, c) = sum_m mu(m, a, c) alpha(m | a0, c)`
    fn eta(&self, a0: usize, a: usize) -> f64 {
        self.mu[1][a] * self.alpha_one[a0] + self.mu[0][a] * (1.0 - self.alpha_one[a0])
    }

    /// `tau(a, c) = sum_a' eta(a, a', c) P(A = a' | c)`
    fn tau(&self, a: usize) -> f64 {
        self.eta(a, 1) * self.pi + self.eta(a, 0) * (1.0 - self.pi)
    }
}

/// Uncentered front-door influence contribution of one row `(y, m, a)`:
/// the mediator-ratio term, the propensity-residual term, and the
/// `eta(1,a,c) - eta(0,a,c)` term.
pub fn frontdoor_contribution(y: f64, m: f64, a: f64, nu: &FrontDoorNuisances) -> f64 {
    let (mi, ai) = (m as usize, a as usize);
    let ratio = (nu.alpha(mi, 1) - nu.alpha(mi, 0)) / nu.alpha(mi, ai) * (y - nu.mu[mi][ai]);
    let weight = (a - nu.pi) / (nu.pi * (1.0 - nu.pi));
    let propensity = weight * (nu.gamma(mi) - nu.tau(ai));
    ratio + propensity + nu.eta(1, ai) - nu.eta(0, ai)
}

pub fn estimate_frontdoor_apipw(table: &ObservationTable, spec: &ModelSpec) -> Result<EstimatorOutput, EstimatorError> {
    estimate_frontdoor_apipw_with(table, spec, &EstimatorOptions::default())
}

/// Front-door augmented primal IPW estimate. Fits `pi(c)` (logistic on the
/// expanded adjustment set), `alpha(m|a,c)` (logistic on `A` and the
/// expanded set), and `mu(m,a,c)` (least squares on `M`, `A`, and the
/// expanded set), then sums over the binary arguments exactly.
pub fn estimate_frontdoor_apipw_with(
    table: &ObservationTable,
    spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<EstimatorOutput, EstimatorError> {
    check_kind(spec, ModelKind::FrontDoor)?;
    options.validate()?;
    let m = table.mediator().ok_or(DataError::SpecRequiresMediator)?;
    let a = table.treatment();
    let y = table.outcome();
    if is_constant(a) {
        return Err(EstimatorError::AllTreatedOrAllControl);
    }
    if is_constant(m) {
        return Err(EstimatorError::MediatorConstant);
    }
    let n = table.n_rows();
    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let level = |v: usize| if v == 1 { &ones } else { &zeros };

    let pi_basis = AdjustmentBasis::new(table, spec, &[])?;
    let x_pi = pi_basis.design(&[])?;
    let pi =
        fit_regression(Family::Bernoulli, &x_pi, a, options.ridge)?.predict_design(&x_pi, options.propensity_clamp)?;

    let alpha_basis = AdjustmentBasis::new(table, spec, &[table.treatment_name()])?;
    let alpha_fit = fit_regression(Family::Bernoulli, &alpha_basis.design(&[a])?, m, options.ridge)?;
    let mut alpha_one = [Vec::new(), Vec::new()];
    for (av, slot) in alpha_one.iter_mut().enumerate() {
        *slot = alpha_fit.predict_design(&alpha_basis.design(&[level(av)])?, options.mediator_clamp)?;
    }

    let mediator_name = table.mediator_name().unwrap_or("m");
    let mu_basis = AdjustmentBasis::new(table, spec, &[mediator_name, table.treatment_name()])?;
    let mu_fit = fit_regression(Family::Gaussian, &mu_basis.design(&[m, a])?, y, options.ridge)?;
    let mut mu = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    for (mv, row) in mu.iter_mut().enumerate() {
        for (av, slot) in row.iter_mut().enumerate() {
            *slot = mu_fit.predict_design(&mu_basis.design(&[level(mv), level(av)])?, 0.0)?;
        }
    }

    let contributions = (0..n)
        .map(|i| {
            let nu = FrontDoorNuisances {
                pi: pi[i],
                alpha_one: [alpha_one[0][i], alpha_one[1][i]],
                mu: [[mu[0][0][i], mu[0][1][i]], [mu[1][0][i], mu[1][1][i]]],
            };
            frontdoor_contribution(y[i], m[i], a[i], &nu)
        })
        .collect();
    let basis = pi_basis.spec_label.clone();
    EstimatorOutput::from_contributions(
        spec.label(),
        contributions,
        vec![
            ("propensity pi(c)".to_string(), basis.clone()),
            ("mediator alpha(m|a,c)".to_string(), basis.clone()),
            ("outcome mu(m,a,c)".to_string(), basis),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_mediation_by_hand() {
        // pi = 1/2, M = A exactly, mu(m, a) = m.
        let nu = FrontDoorNuisances {
            pi: 0.5,
            alpha_one: [0.0, 1.0],
            mu: [[0.0, 0.0], [1.0, 1.0]],
        };
        let rows = [(1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)];
        let c: Vec<f64> = rows
            .iter()
            .map(|&(a, m, y)| frontdoor_contribution(y, m, a, &nu))
            .collect();
        assert_eq!(c, vec![1.0; 4]);
    }

    #[test]
    fn zero_outcome_gives_zero() {
        let a = vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let m = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let t = ObservationTable::new(
            Column::new("y", vec![0.0; 8]),
            Column::new("a", a),
            None,
            Some(Column::new("m", m)),
            vec![],
        )
        .unwrap();
        let out = estimate_frontdoor_apipw(&t, &ModelSpec::frontdoor(Vec::<String>::new())).unwrap();
        assert_abs_diff_eq!(out.psi_hat, 0.0, epsilon = 1e-12);
        assert!(out.if_values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_mediator_is_an_error() {
        let t = ObservationTable::new(
            Column::new("y", vec![1.0, 2.0, 3.0, 4.0]),
            Column::new("a", vec![1.0, 0.0, 1.0, 0.0]),
            None,
            Some(Column::new("m", vec![1.0; 4])),
            vec![],
        )
        .unwrap();
        assert_eq!(
            estimate_frontdoor_apipw(&t, &ModelSpec::frontdoor(Vec::<String>::new())).unwrap_err(),
            EstimatorError::MediatorConstant
        );
    }

    #[test]
    fn missing_mediator_is_an_error() {
        let t = ObservationTable::new(
            Column::new("y", vec![1.0, 2.0, 3.0, 4.0]),
            Column::new("a", vec![1.0, 0.0, 1.0, 0.0]),
            None,
            None,
            vec![],
        )
        .unwrap();
        assert_eq!(
            estimate_frontdoor_apipw(&t, &ModelSpec::frontdoor(Vec::<String>::new())).unwrap_err(),
            EstimatorError::Data(DataError::SpecRequiresMediator)
        );
    }
}
