use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use evfactors_core::combine::{
    analyze_all, estimate_covariance, joint, product_test, write_combined_csv, write_intervals_csv, CombineError,
    CovarianceEstimate, JointEstimate, COMBINED_CSV_HEADER, INTERVAL_CSV_HEADER,
};
use evfactors_core::data::ModelSpec;
use evfactors_core::estimators::EstimatorOutput;
use evfactors_core::simulate::{generate, ScenarioConfig, ScenarioId};

fn out(label: &str, psi_hat: f64, if_values: Vec<f64>) -> EstimatorOutput {
    EstimatorOutput {
        label: label.into(),
        psi_hat,
        if_values,
        nuisance_report: vec![],
    }
}

fn fixed(psi: &[f64], sigma: DMatrix<f64>, n: usize) -> (JointEstimate, CovarianceEstimate) {
    let k = psi.len();
    let joint = JointEstimate {
        labels: (0..k).map(|i| format!("m{i}")).collect(),
        psi: psi.to_vec(),
        if_matrix: DMatrix::zeros(n, k),
    };
    (joint, CovarianceEstimate { sigma })
}

#[test]
fn two_models_with_identity_covariance() {
    let (j, s) = fixed(&[2.0, 3.0], DMatrix::identity(2, 2), 100);
    let r = product_test(&j, &s, &[0.05]).unwrap();
    assert_eq!(r.gamma, vec![3.0, 2.0]);
    assert_abs_diff_eq!(r.variance, 13.0, epsilon = 1e-12);
    // 10 * 6 / sqrt(13)
    assert_abs_diff_eq!(r.t_stat, 16.641, epsilon = 1e-3);
    assert_eq!(r.rejects(0.05), Some(true));
    assert!(r.p_value < 1e-12);
}

#[test]
fn covariance_examples() {
    let j = joint(&[out("a", 0.0, vec![1.0, -1.0]), out("b", 0.0, vec![-1.0, 1.0])]).unwrap();
    let s = estimate_covariance(&j).sigma;
    assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

    let col = vec![0.5, -1.5, 2.0, -1.0];
    let j = joint(&[out("a", 1.0, col.clone()), out("b", 1.0, col.clone())]).unwrap();
    let s = estimate_covariance(&j);
    let v = col.iter().map(|x| x * x).sum::<f64>() / 4.0;
    assert!(s.sigma.iter().all(|&x| (x - v).abs() < 1e-15));
    assert!(s.min_eigenvalue().abs() < 1e-12);

    let j = joint(&[
        out("a", 1.0, vec![1.0, 1.0, -1.0, -1.0]),
        out("b", 1.0, vec![1.0, -1.0, 1.0, -1.0]),
    ])
    .unwrap();
    let s = estimate_covariance(&j);
    assert_eq!(s.sigma, DMatrix::identity(2, 2));
    assert_abs_diff_eq!(s.condition_number(), 1.0, epsilon = 1e-12);
}

#[test]
fn joint_rejects_bad_inputs() {
    assert_eq!(
        joint(&[out("a", 1.0, vec![0.0; 3])]).unwrap_err(),
        CombineError::TooFewModels(1)
    );
    assert_eq!(
        joint(&[out("a", 1.0, vec![0.0; 3]), out("a", 1.0, vec![0.0; 3])]).unwrap_err(),
        CombineError::DuplicateLabel("a".into())
    );
    assert!(matches!(
        joint(&[out("a", 1.0, vec![0.0; 3]), out("b", 1.0, vec![0.0; 4])]),
        Err(CombineError::LengthMismatch {
            expected: 3,
            found: 4,
            ..
        })
    ));
    let (j, s) = fixed(&[1.0, 1.0], DMatrix::identity(2, 2), 10);
    assert_eq!(
        product_test(&j, &s, &[1.5]).unwrap_err(),
        CombineError::InvalidLevel(1.5)
    );
}

#[test]
fn degenerate_variance_never_rejects() {
    let (j, s) = fixed(&[0.0, 0.0], DMatrix::identity(2, 2), 50);
    let r = product_test(&j, &s, &[0.05, 0.5]).unwrap();
    assert!(r.degenerate);
    assert_eq!((r.t_stat, r.p_value), (0.0, 1.0));
    assert!(r.reject_at.iter().all(|(_, rej)| !rej));
}

#[test]
fn analyze_all_shapes_and_errors() {
    let t = generate(&ScenarioConfig {
        id: ScenarioId::BfiA,
        n: 400,
        beta: 10.0,
        seed: 9,
    })
    .unwrap();
    let specs = ScenarioId::BfiA.default_models();
    let a = analyze_all(&t, &specs, &[0.01, 0.05]).unwrap();
    assert_eq!(a.estimates.len(), 3);
    assert_eq!(a.intervals.len(), 3);
    assert_eq!(a.covariance.sigma.shape(), (3, 3));
    assert_eq!(a.test.k, 3);
    assert_eq!(a.test.reject_at.len(), 2);

    assert_eq!(
        analyze_all(&t, &specs[..1], &[0.05]).unwrap_err(),
        CombineError::TooFewModels(1)
    );
    let dup = vec![ModelSpec::backdoor(["c1"]), ModelSpec::backdoor(["c1"])];
    assert!(matches!(
        analyze_all(&t, &dup, &[0.05]),
        Err(CombineError::DuplicateLabel(_))
    ));

    let mut buf = Vec::new();
    write_intervals_csv(&mut buf, &a.intervals).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(INTERVAL_CSV_HEADER));
    assert_eq!(text.lines().count(), 4);
    let mut buf = Vec::new();
    write_combined_csv(&mut buf, &a.test).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(COMBINED_CSV_HEADER));
    assert!(text.lines().nth(1).unwrap().starts_with("3,"));
}

fn if_matrix() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..5, 3usize..40).prop_flat_map(|(k, n)| {
        (
            proptest::collection::vec(-3.0f64..3.0, k),
            proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, n), k),
        )
    })
}

fn outputs(psi: &[f64], cols: &[Vec<f64>]) -> Vec<EstimatorOutput> {
    psi.iter()
        .zip(cols)
        .enumerate()
        .map(|(i, (p, c))| out(&format!("m{i}"), *p, c.clone()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn covariance_matches_double_loop_and_is_psd((psi, cols) in if_matrix()) {
        let j = joint(&outputs(&psi, &cols)).unwrap();
        let s = estimate_covariance(&j);
        let n = cols[0].len() as f64;
        for a in 0..psi.len() {
            for b in 0..psi.len() {
                let mut v = 0.0;
                for (x, y) in cols[a].iter().zip(&cols[b]) {
                    v += x * y;
                }
                prop_assert!((s.sigma[(a, b)] - v / n).abs() < 1e-12);
                prop_assert_eq!(s.sigma[(a, b)], s.sigma[(b, a)]);
            }
        }
        prop_assert!(s.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn gamma_is_the_gradient_of_the_product((psi, cols) in if_matrix()) {
        let j = joint(&outputs(&psi, &cols)).unwrap();
        let r = product_test(&j, &estimate_covariance(&j), &[0.05]).unwrap();
        let prod = |p: &[f64]| p.iter().product::<f64>();
        for k in 0..psi.len() {
            // Central difference is exact for a function linear in psi_k.
            let h = 0.5;
            let (mut up, mut down) = (psi.clone(), psi.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (prod(&up) - prod(&down)) / (2.0 * h);
            prop_assert!((r.gamma[k] - fd).abs() < 1e-10 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn model_order_does_not_change_the_test((psi, cols) in if_matrix(), rot in 0usize..4) {
        let base = outputs(&psi, &cols);
        let mut shuffled = base.clone();
        shuffled.rotate_left(rot % base.len());
        shuffled.reverse();
        let j1 = joint(&base).unwrap();
        let j2 = joint(&shuffled).unwrap();
        let r1 = product_test(&j1, &estimate_covariance(&j1), &[0.05]).unwrap();
        let r2 = product_test(&j2, &estimate_covariance(&j2), &[0.05]).unwrap();
        prop_assert_eq!(r1.degenerate, r2.degenerate);
        prop_assert!((r1.t_stat - r2.t_stat).abs() < 1e-9 * (1.0 + r1.t_stat.abs()));
        prop_assert!((r1.p_value - r2.p_value).abs() < 1e-9);
    }

    #[test]
    fn a_zero_estimate_zeroes_the_statistic((mut psi, cols) in if_matrix(), which in 0usize..4) {
        let k = which % psi.len();
        psi[k] = 0.0;
        let j = joint(&outputs(&psi, &cols)).unwrap();
        let r = product_test(&j, &estimate_covariance(&j), &[0.05]).unwrap();
        prop_assert_eq!(r.product, 0.0);
        prop_assert_eq!(r.t_stat, 0.0);
        prop_assert!(r.rejects(0.05) == Some(false));
    }
}
