use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use evfactors_core::data::{Column, ModelSpec, ObservationTable};
use evfactors_core::estimators::{
    backdoor_contributions, estimate, estimate_backdoor_aipw, estimate_backdoor_aipw_with, estimate_frontdoor_apipw,
    estimate_iv_wald, frontdoor_contribution, wald_interval, EstimatorError, EstimatorOptions, EstimatorOutput,
    FrontDoorNuisances, WaldInterval,
};
use evfactors_core::nuisance::{fit_regression, Family, PROBABILITY_CLAMP};
use evfactors_core::simulate::{generate, ScenarioConfig, ScenarioId};
use evfactors_core::stats::expit;

fn iv_table(z: &[f64], a: &[f64], y: &[f64]) -> ObservationTable {
    ObservationTable::new(
        Column::new("y", y.to_vec()),
        Column::new("a", a.to_vec()),
        Some(Column::new("z", z.to_vec())),
        None,
        vec![],
    )
    .unwrap()
}

fn brute_force_wald(z: &[f64], a: &[f64], y: &[f64]) -> f64 {
    let mean_where = |v: &[f64], arm: f64| {
        let (mut s, mut c) = (0.0, 0.0);
        for i in 0..v.len() {
            if z[i] == arm {
                s += v[i];
                c += 1.0;
            }
        }
        s / c
    };
    (mean_where(y, 1.0) - mean_where(y, 0.0)) / (mean_where(a, 1.0) - mean_where(a, 0.0))
}

#[test]
fn iv_examples() {
    let t = iv_table(&[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 1.0]);
    assert_abs_diff_eq!(
        estimate_iv_wald(&t, &ModelSpec::iv()).unwrap().psi_hat,
        1.0,
        epsilon = 1e-15
    );

    let t = iv_table(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0], &[1.0, 3.0, 5.0, 7.0]);
    assert_abs_diff_eq!(
        estimate_iv_wald(&t, &ModelSpec::iv()).unwrap().psi_hat,
        8.0,
        epsilon = 1e-12
    );

    let t = iv_table(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0], &[4.5; 4]);
    assert_eq!(estimate_iv_wald(&t, &ModelSpec::iv()).unwrap().psi_hat, 0.0);
}

#[test]
fn iv_degenerate_inputs() {
    let t = iv_table(&[1.0; 4], &[0.0, 1.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(
        estimate_iv_wald(&t, &ModelSpec::iv()).unwrap_err(),
        EstimatorError::InstrumentConstant
    );
    let t = iv_table(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 0.0], &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(
        estimate_iv_wald(&t, &ModelSpec::iv()).unwrap_err(),
        EstimatorError::WeakInstrumentDegenerate
    );
}

#[test]
fn backdoor_four_rows_give_two_exactly() {
    let t = ObservationTable::new(
        Column::new("y", vec![2.0, 2.0, 0.0, 0.0]),
        Column::new("a", vec![1.0, 1.0, 0.0, 0.0]),
        None,
        None,
        vec![],
    )
    .unwrap();
    let opts = EstimatorOptions {
        ridge: 0.0,
        ..Default::default()
    };
    let out = estimate_backdoor_aipw_with(&t, &ModelSpec::backdoor(Vec::<String>::new()), &opts).unwrap();
    assert_abs_diff_eq!(out.psi_hat, 2.0, epsilon = 1e-12);
    // pi = 0.5, mu(1) = 2, mu(0) = 0: every uncentered contribution is 2
    let by_hand = backdoor_contributions(
        &[2.0, 2.0, 0.0, 0.0],
        &[1.0, 1.0, 0.0, 0.0],
        &[0.5; 4],
        &[2.0; 4],
        &[0.0; 4],
    );
    assert_eq!(by_hand, vec![2.0; 4]);
}

#[test]
fn frontdoor_perfect_mediation_rows_give_one() {
    let nu = FrontDoorNuisances {
        pi: 0.5,
        alpha_one: [0.0, 1.0],
        mu: [[0.0, 0.0], [1.0, 1.0]],
    };
    for (y, m, a) in [(1.0, 1.0, 1.0), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)] {
        assert_eq!(frontdoor_contribution(y, m, a, &nu), 1.0);
    }
}

#[test]
fn zero_outcome_gives_zero_everywhere() {
    let t = generate(&ScenarioConfig {
        id: ScenarioId::BfiA,
        n: 200,
        beta: 10.0,
        seed: 4,
    })
    .unwrap()
    .with_outcome(vec![0.0; 200])
    .unwrap();
    for spec in ScenarioId::BfiA.default_models() {
        let out = estimate(&t, &spec, &EstimatorOptions::default()).unwrap();
        assert_eq!(out.psi_hat, 0.0, "{}", spec.label());
        assert!(out.if_values.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn missing_roles_are_reported() {
    let t = generate(&ScenarioConfig {
        id: ScenarioId::BiA,
        n: 50,
        beta: 0.0,
        seed: 1,
    })
    .unwrap();
    assert!(matches!(
        estimate_frontdoor_apipw(&t, &ModelSpec::frontdoor(["c1"])),
        Err(EstimatorError::Data(_))
    ));
    assert!(matches!(
        estimate_backdoor_aipw(&t, &ModelSpec::iv()),
        Err(EstimatorError::WrongKind { .. })
    ));
}

#[test]
fn wald_interval_reproduces_reported_row() {
    let w = WaldInterval::from_parts("backdoor", 0.32, 0.765, 0.95).unwrap();
    assert_abs_diff_eq!(w.p_value, 0.676, epsilon = 1e-3);
    assert_abs_diff_eq!(w.lower, -1.18, epsilon = 5e-3);
    assert_abs_diff_eq!(w.upper, 1.82, epsilon = 5e-3);

    let z = WaldInterval::from_parts("x", 0.0, 2.0, 0.9).unwrap();
    assert_eq!(z.p_value, 1.0);
    assert_abs_diff_eq!(z.lower, -z.upper, epsilon = 1e-15);
}

fn output(values: Vec<f64>) -> EstimatorOutput {
    EstimatorOutput {
        label: "x".into(),
        psi_hat: 1.0,
        if_values: values,
        nuisance_report: vec![],
    }
}

#[test]
fn wald_interval_degeneracy() {
    assert_eq!(
        wald_interval(&output(vec![0.0; 5]), 0.95).unwrap_err(),
        EstimatorError::DegenerateVariance
    );
    let w = wald_interval(&output(vec![0.5; 4]), 0.95).unwrap();
    assert_abs_diff_eq!(w.std_error, 0.25, epsilon = 1e-15);
    assert!(matches!(
        wald_interval(&output(vec![1.0, -1.0]), 1.0),
        Err(EstimatorError::InvalidLevel(_))
    ));
}

fn simulated(id: ScenarioId, n: usize, beta: f64, seed: u64) -> ObservationTable {
    generate(&ScenarioConfig { id, n, beta, seed }).unwrap()
}

fn within_three_se(out: &EstimatorOutput, truth: f64) {
    let w = wald_interval(out, 0.95).unwrap();
    assert!(
        (out.psi_hat - truth).abs() < 3.0 * w.std_error,
        "{}: {} vs {truth} (se {})",
        out.label,
        out.psi_hat,
        w.std_error
    );
}

#[test]
fn backdoor_recovers_the_effect_in_the_multi_backdoor_design() {
    let t = simulated(ScenarioId::Mbd, 5000, 10.0, 77);
    let out = estimate_backdoor_aipw(&t, &ModelSpec::backdoor(["c1", "c2", "c3", "c4"])).unwrap();
    within_three_se(&out, 10.0);
}

/// E over C2 ~ Unif(-2, 2) of expit(k - 1 + C2) - expit(-1 + C2), by Simpson's rule.
fn mediator_shift(k: f64) -> f64 {
    let steps = 2000;
    let h = 4.0 / steps as f64;
    let f = |c: f64| expit(k - 1.0 + c) - expit(-1.0 + c);
    let mut s = f(-2.0) + f(2.0);
    for i in 1..steps {
        let c = -2.0 + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(c);
    }
    s * h / 3.0 / 4.0
}

#[test]
fn frontdoor_recovers_the_effect_when_both_models_hold() {
    // Y depends on A only through M, so the effect is beta times the shift
    // in P(M = 1).
    let t = simulated(ScenarioId::BfA, 5000, 10.0, 78);
    let out = estimate_frontdoor_apipw(&t, &ModelSpec::frontdoor(["c1", "c2", "c3", "c4"])).unwrap();
    within_three_se(&out, 10.0 * mediator_shift(2.0));
    let back = estimate_backdoor_aipw(&t, &ModelSpec::backdoor(["c1", "c2", "c3", "c4"])).unwrap();
    within_three_se(&back, 10.0 * mediator_shift(2.0));
}

#[test]
fn doubly_robust_with_correct_propensity_and_crude_outcome_model() {
    // Propensity expit(C1 + C2) fitted on [1, C1, C2] (correct); outcome
    // regression on [1, A] only (wrong).
    let mut maes = Vec::new();
    for n in [500, 2000, 8000] {
        let mut total = 0.0;
        let reps = 200;
        for rep in 0..reps {
            let t = simulated(ScenarioId::Mbd, n, 10.0, 1000 + rep);
            let (c1, c2) = (t.covariate("c1").unwrap(), t.covariate("c2").unwrap());
            let (a, y) = (t.treatment(), t.outcome());
            let xp = DMatrix::from_fn(n, 3, |i, j| [1.0, c1[i], c2[i]][j]);
            let pi = fit_regression(Family::Bernoulli, &xp, a, 1e-8)
                .unwrap()
                .predict_design(&xp, PROBABILITY_CLAMP)
                .unwrap();
            let xm = DMatrix::from_fn(n, 2, |i, j| [1.0, a[i]][j]);
            let mu = fit_regression(Family::Gaussian, &xm, y, 1e-8).unwrap();
            let mu1 = vec![mu.coefficients[0] + mu.coefficients[1]; n];
            let mu0 = vec![mu.coefficients[0]; n];
            let c = backdoor_contributions(y, a, &pi, &mu1, &mu0);
            let psi = c.iter().sum::<f64>() / n as f64;
            total += (psi - 10.0).abs();
        }
        maes.push(total / reps as f64);
    }
    assert!(maes[0] > maes[1] && maes[1] > maes[2], "{maes:?}");
}

/// Population front-door functional for a covariate-free discrete law.
fn frontdoor_functional(nu: &FrontDoorNuisances) -> f64 {
    let p_m = |m: usize, a: usize| if m == 1 { nu.alpha_one[a] } else { 1.0 - nu.alpha_one[a] };
    let p_a = |a: usize| if a == 1 { nu.pi } else { 1.0 - nu.pi };
    let mut psi = 0.0;
    for m in 0..2 {
        for a2 in 0..2 {
            psi += (p_m(m, 1) - p_m(m, 0)) * nu.mu[m][a2] * p_a(a2);
        }
    }
    psi
}

prop_compose! {
    fn discrete_law()(pi in 0.05f64..0.95, a0 in 0.05f64..0.95, a1 in 0.05f64..0.95,
                      mu in proptest::array::uniform4(-5.0f64..5.0)) -> FrontDoorNuisances {
        FrontDoorNuisances { pi, alpha_one: [a0, a1], mu: [[mu[0], mu[1]], [mu[2], mu[3]]] }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frontdoor_contribution_has_population_mean_psi(nu in discrete_law()) {
        // E[contribution] under the law with Y | M, A having mean mu[m][a]:
        // the y-residual term has mean zero, so take y = mu[m][a].
        let mut mean = 0.0;
        for a in 0..2 {
            let pa = if a == 1 { nu.pi } else { 1.0 - nu.pi };
            for m in 0..2 {
                let pm = if m == 1 { nu.alpha_one[a] } else { 1.0 - nu.alpha_one[a] };
                mean += pa * pm * frontdoor_contribution(nu.mu[m][a], m as f64, a as f64, &nu);
            }
        }
        prop_assert!((mean - frontdoor_functional(&nu)).abs() < 1e-10);
    }

    #[test]
    fn backdoor_contribution_has_population_mean_effect(pi in 0.05f64..0.95, mu1 in -5.0f64..5.0, mu0 in -5.0f64..5.0, shift in -3.0f64..3.0) {
        // Residual y - mu(a) averages to zero; shift the outcome model to
        // check the augmentation cancels its error.
        let mut mean = 0.0;
        for (a, pa) in [(1.0, pi), (0.0, 1.0 - pi)] {
            let y = if a == 1.0 { mu1 } else { mu0 };
            let c = backdoor_contributions(&[y], &[a], &[pi], &[mu1 + shift], &[mu0 - shift]);
            mean += pa * c[0];
        }
        prop_assert!((mean - (mu1 - mu0)).abs() < 1e-10);
    }

    #[test]
    fn iv_matches_brute_force(rows in proptest::collection::vec((0u8..2, 0u8..2, -10.0f64..10.0), 4..80)) {
        let z: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let a: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let t = iv_table(&z, &a, &y);
        match estimate_iv_wald(&t, &ModelSpec::iv()) {
            Ok(out) => {
                let truth = brute_force_wald(&z, &a, &y);
                prop_assert!((out.psi_hat - truth).abs() <= 1e-12 * truth.abs().max(1.0));
                let mean = out.if_values.iter().sum::<f64>() / out.n() as f64;
                prop_assert!(mean.abs() < 1e-8);
            }
            Err(e) => prop_assert!(matches!(e, EstimatorError::InstrumentConstant | EstimatorError::WeakInstrumentDegenerate)),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outcome_scale_shift_and_row_order(seed in 0u64..1000, c in 0.1f64..20.0, shift in -50.0f64..50.0) {
        let t = simulated(ScenarioId::BfiA, 300, 10.0, seed);
        let opts = EstimatorOptions::default();
        let n = t.n_rows();
        let scaled = t.with_outcome(t.outcome().iter().map(|v| c * v).collect()).unwrap();
        let shifted = t.with_outcome(t.outcome().iter().map(|v| v + shift).collect()).unwrap();
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let permuted = t.permuted(&order).unwrap();
        for spec in ScenarioId::BfiA.default_models() {
            let base = estimate(&t, &spec, &opts).unwrap();
            let mean = base.if_values.iter().sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-8);

            let s = estimate(&scaled, &spec, &opts).unwrap();
            let tol = 1e-8 * (1.0 + c * base.psi_hat.abs());
            prop_assert!((s.psi_hat - c * base.psi_hat).abs() < tol);
            for (x, y) in s.if_values.iter().zip(&base.if_values) {
                prop_assert!((x - c * y).abs() < 1e-8 * (1.0 + c * y.abs()));
            }

            let sh = estimate(&shifted, &spec, &opts).unwrap();
            prop_assert!((sh.psi_hat - base.psi_hat).abs() < 1e-8 * (1.0 + shift.abs()));

            let p = estimate(&permuted, &spec, &opts).unwrap();
            prop_assert!((p.psi_hat - base.psi_hat).abs() < 1e-9);
            for (k, &i) in order.iter().enumerate() {
                prop_assert!((p.if_values[k] - base.if_values[i]).abs() < 1e-8);
            }
        }
    }
}
