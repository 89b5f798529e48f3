use nalgebra::{Cholesky, DMatrix, DVector};

use super::{BasisSpec, NuisanceError};
use crate::stats::expit;

/// Fitted probabilities are clamped to `[PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP]`.
pub const PROBABILITY_CLAMP: f64 = 0.01;
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// IRLS stops once no coefficient moves by more than this.
pub const IRLS_TOLERANCE: f64 = 1e-10;
pub const MAX_IRLS_ITERATIONS: usize = 100;
const STALL_WINDOW: usize = 10;
const STALL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegression {
    pub family: Family,
    pub coefficients: DVector<f64>,
    pub basis: Option<BasisSpec>,
    pub feature_names: Vec<String>,
    /// IRLS iterations used (1 for Gaussian fits).
    pub iterations: usize,
}

/// Ridge penalty weights: every column except a leading all-ones intercept.
fn penalty_weights(design: &DMatrix<f64>, ridge: f64) -> DVector<f64> {
    let mut w = DVector::from_element(design.ncols(), ridge);
    if design.ncols() > 0 && design.column(0).iter().all(|&v| v == 1.0) {
        w[0] = 0.0;
    }
    w
}

/// Solves `(gram + diag(penalty)) x = rhs` by Cholesky on the
/// Jacobi-equilibrated system.
fn solve_penalized(
    mut gram: DMatrix<f64>,
    penalty: &DVector<f64>,
    rhs: &DVector<f64>,
    strict: bool,
) -> Result<DVector<f64>, NuisanceError> {
    let d = gram.nrows();
    for i in 0..d {
        gram[(i, i)] += penalty[i];
    }
    let mut scale = DVector::zeros(d);
    for i in 0..d {
        let diag = gram[(i, i)];
        if !diag.is_finite() || diag <= 0.0 {
            return Err(NuisanceError::SingularDesign);
        }
        scale[i] = diag.sqrt().recip();
    }
    for j in 0..d {
        for i in 0..d {
            gram[(i, j)] *= scale[i] * scale[j];
        }
    }
    let chol = match Cholesky::new(gram.clone()) {
        Some(c) => c,
        None if !strict => jittered_cholesky(gram)?,
        None => return Err(NuisanceError::SingularDesign),
    };
    if strict {
        let l = chol.l_dirty();
        let min_pivot = (0..d).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-12 {
            return Err(NuisanceError::SingularDesign);
        }
    }
    let scaled_rhs = rhs.component_mul(&scale);
    let y = chol.solve(&scaled_rhs);
    let x = y.component_mul(&scale);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(NuisanceError::NonFinite)
    }
}

/// With a positive ridge the system is positive definite in exact
/// arithmetic, so a failed factorization is rounding on a near-collinear
/// design. Retries with a growing diagonal jitter on the unit-diagonal
/// system.
fn jittered_cholesky(gram: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, NuisanceError> {
    let mut jitter = 1e-12;
    while jitter <= 1e-4 {
        let mut g = gram.clone();
        for i in 0..g.nrows() {
            g[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(g) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(NuisanceError::SingularDesign)
}

fn check_inputs(family: Family, design: &DMatrix<f64>, response: &[f64], ridge: f64) -> Result<(), NuisanceError> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(NuisanceError::InvalidRidge(ridge));
    }
    if design.ncols() == 0 || design.nrows() == 0 {
        return Err(NuisanceError::EmptyDesign);
    }
    if response.len() != design.nrows() {
        return Err(NuisanceError::DimensionMismatch {
            expected: design.nrows(),
            found: response.len(),
        });
    }
    if ridge == 0.0 && design.nrows() < design.ncols() {
        return Err(NuisanceError::SingularDesign);
    }
    if family == Family::Bernoulli {
        if let Some(row) = response.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(NuisanceError::NonBinaryResponse(row + 1));
        }
    }
    Ok(())
}

/// Fits a Gaussian (ridge least squares) or Bernoulli (ridge logistic, by
/// iteratively reweighted least squares) regression of `response` on
/// `design`. The leading intercept column, when present, is not penalized.
pub fn fit_regression(
    family: Family,
    design: &DMatrix<f64>,
    response: &[f64],
    ridge: f64,
) -> Result<FittedRegression, NuisanceError> {
    check_inputs(family, design, response, ridge)?;
    let penalty = penalty_weights(design, ridge);
    let strict = ridge == 0.0;
    let y = DVector::from_column_slice(response);

    let (coefficients, iterations) = match family {
        Family::Gaussian => {
            let gram = design.tr_mul(design);
            let rhs = design.tr_mul(&y);
            (solve_penalized(gram, &penalty, &rhs, strict)?, 1)
        }
        Family::Bernoulli => irls(design, &y, &penalty, strict)?,
    };

    Ok(FittedRegression {
        family,
        coefficients,
        basis: None,
        feature_names: (0..design.ncols()).map(|j| format!("x{j}")).collect(),
        iterations,
    })
}

/// Penalized negative log-likelihood of the logistic model.
fn logistic_objective(eta: &DVector<f64>, y: &DVector<f64>, beta: &DVector<f64>, penalty: &DVector<f64>) -> f64 {
    let nll: f64 = eta
        .iter()
        .zip(y.iter())
        .map(|(&e, &yi)| {
            // log(1 + exp(e)) - y e, computed without overflow
            let softplus = if e > 0.0 {
                e + (-e).exp().ln_1p()
            } else {
                e.exp().ln_1p()
            };
            softplus - yi * e
        })
        .sum();
    let pen: f64 = beta.iter().zip(penalty.iter()).map(|(b, l)| 0.5 * l * b * b).sum();
    nll + pen
}

fn irls(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    penalty: &DVector<f64>,
    strict: bool,
) -> Result<(DVector<f64>, usize), NuisanceError> {
    let d = design.ncols();
    let mut beta = DVector::zeros(d);
    if penalty[0] == 0.0 {
        let ybar = y.mean();
        if ybar > 0.0 && ybar < 1.0 {
            beta[0] = (ybar / (1.0 - ybar)).ln();
        }
    }
    let mut eta = design * &beta;
    let mut objective = logistic_objective(&eta, y, &beta, penalty);

    let mut best = (objective, beta.clone());
    let mut tail = (f64::INFINITY, f64::NEG_INFINITY);

    for iter in 1..=MAX_IRLS_ITERATIONS {
        let p = eta.map(expit);
        let resid = y - &p;
        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= p[i] * (1.0 - p[i]);
        }
        let hessian = design.tr_mul(&weighted);
        let gradient = design.tr_mul(&resid) - penalty.component_mul(&beta);
        let delta = solve_penalized(hessian, penalty, &gradient, strict)?;

        // Newton step with halving while the objective increases.
        let mut t = 1.0;
        let (candidate, candidate_eta, candidate_objective) = loop {
            let cand = &beta + &delta * t;
            let cand_eta = design * &cand;
            let obj = logistic_objective(&cand_eta, y, &cand, penalty);
            if obj <= objective + 1e-12 * (1.0 + objective.abs()) || t < 1e-8 {
                break (cand, cand_eta, obj);
            }
            t *= 0.5;
        };
        let max_step = (&candidate - &beta).amax();
        beta = candidate;
        eta = candidate_eta;
        objective = candidate_objective;
        if !beta.iter().all(|v| v.is_finite()) {
            return Err(NuisanceError::NonFinite);
        }
        if objective < best.0 {
            best = (objective, beta.clone());
        }
        if iter > MAX_IRLS_ITERATIONS - STALL_WINDOW {
            tail = (tail.0.min(objective), tail.1.max(objective));
        }
        // Relative once coefficients exceed 1: under (quasi-)separation the
        // ridge keeps them finite but large, and rounding alone moves them
        // by more than an absolute 1e-10.
        if max_step < IRLS_TOLERANCE * beta.amax().max(1.0) {
            return Ok((beta, iter));
        }
    }
    // Near-separated designs can leave Newton wandering along a flat valley
    // where the objective is already fixed to rounding precision. Accept the
    // best iterate then; anything still moving is a genuine failure.
    if tail.1 - tail.0 <= STALL_TOLERANCE * (1.0 + best.0.abs()) {
        return Ok((best.1, MAX_IRLS_ITERATIONS));
    }
    Err(NuisanceError::NoConvergence(MAX_IRLS_ITERATIONS))
}

impl FittedRegression {
    pub fn with_labels(mut self, basis: BasisSpec, feature_names: Vec<String>) -> Self {
        self.basis = Some(basis);
        self.feature_names = feature_names;
        self
    }

    pub fn width(&self) -> usize {
        self.coefficients.len()
    }

    fn linear_predictor(&self, row: &[f64]) -> Result<f64, NuisanceError> {
        if row.len() != self.width() {
            return Err(NuisanceError::DimensionMismatch {
                expected: self.width(),
                found: row.len(),
            });
        }
        Ok(row.iter().zip(self.coefficients.iter()).map(|(x, b)| x * b).sum())
    }

    /// Prediction for one design row; Bernoulli probabilities are clamped to
    /// `[PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP]`.
    pub fn predict(&self, row: &[f64]) -> Result<f64, NuisanceError> {
        self.predict_with_clamp(row, PROBABILITY_CLAMP)
    }

    pub fn predict_with_clamp(&self, row: &[f64], clamp: f64) -> Result<f64, NuisanceError> {
        let eta = self.linear_predictor(row)?;
        Ok(self.respond(eta, clamp))
    }

    fn respond(&self, eta: f64, clamp: f64) -> f64 {
        match self.family {
            Family::Gaussian => eta,
            Family::Bernoulli => expit(eta).clamp(clamp, 1.0 - clamp),
        }
    }

    /// Predictions for every row of `design`.
    pub fn predict_design(&self, design: &DMatrix<f64>, clamp: f64) -> Result<Vec<f64>, NuisanceError> {
        if design.ncols() != self.width() {
            return Err(NuisanceError::DimensionMismatch {
                expected: self.width(),
                found: design.ncols(),
            });
        }
        let eta = design * &self.coefficients;
        Ok(eta.iter().map(|&e| self.respond(e, clamp)).collect())
    }

    /// Gradient of the penalized log-likelihood (Bernoulli) or of minus half
    /// the penalized residual sum of squares (Gaussian) at the fitted
    /// coefficients; zero at an exact optimum.
    pub fn score(&self, design: &DMatrix<f64>, response: &[f64], ridge: f64) -> DVector<f64> {
        let y = DVector::from_column_slice(response);
        let eta = design * &self.coefficients;
        let fitted = match self.family {
            Family::Gaussian => eta,
            Family::Bernoulli => eta.map(expit),
        };
        let shrink = penalty_weights(design, ridge).component_mul(&self.coefficients);
        design.tr_mul(&(y - fitted)) - shrink
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ones(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn intercept_only_gaussian_is_the_mean() {
        let fit = fit_regression(Family::Gaussian, &ones(3), &[1.0, 2.0, 3.0], DEFAULT_RIDGE).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn intercept_only_bernoulli_balanced_is_one_half() {
        let fit = fit_regression(Family::Bernoulli, &ones(4), &[0.0, 1.0, 0.0, 1.0], DEFAULT_RIDGE).unwrap();
        assert_abs_diff_eq!(fit.predict(&[1.0]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_by_two_normal_equations() {
        // X'X = [[3,3],[3,5]], X'y = [9,13]  =>  b = (1, 2)
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let fit = fit_regression(Family::Gaussian, &x, &[1.0, 3.0, 5.0], 0.0).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn square_full_rank_design_interpolates() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 4.0]);
        let y = [0.5, -1.0, 7.0];
        let fit = fit_regression(Family::Gaussian, &x, &y, 0.0).unwrap();
        let pred = fit.predict_design(&x, PROBABILITY_CLAMP).unwrap();
        for (p, t) in pred.iter().zip(y) {
            assert_abs_diff_eq!(*p, t, epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(
            fit_regression(Family::Gaussian, &x, &[1.0, 2.0, 3.0], 0.0).unwrap_err(),
            NuisanceError::SingularDesign
        );
        assert!(fit_regression(Family::Gaussian, &x, &[1.0, 2.0, 3.0], 1e-6).is_ok());
    }

    #[test]
    fn predictions_and_clamp() {
        let g = FittedRegression {
            family: Family::Gaussian,
            coefficients: DVector::from_vec(vec![1.0, 2.0]),
            basis: None,
            feature_names: vec![],
            iterations: 1,
        };
        assert_eq!(g.predict(&[1.0, 3.0]).unwrap(), 7.0);
        assert_eq!(
            g.predict(&[1.0]).unwrap_err(),
            NuisanceError::DimensionMismatch { expected: 2, found: 1 }
        );

        let mut b = g.clone();
        b.family = Family::Bernoulli;
        b.coefficients = DVector::from_vec(vec![0.0]);
        assert_eq!(b.predict(&[1.0]).unwrap(), 0.5);
        b.coefficients = DVector::from_vec(vec![50.0]);
        assert_eq!(b.predict(&[1.0]).unwrap(), 1.0 - PROBABILITY_CLAMP);
        b.coefficients = DVector::from_vec(vec![-50.0]);
        assert_eq!(b.predict(&[1.0]).unwrap(), PROBABILITY_CLAMP);
    }

    #[test]
    fn bernoulli_response_must_be_binary() {
        assert_eq!(
            fit_regression(Family::Bernoulli, &ones(3), &[0.0, 0.5, 1.0], DEFAULT_RIDGE).unwrap_err(),
            NuisanceError::NonBinaryResponse(2)
        );
    }

    fn logistic_data() -> (DMatrix<f64>, Vec<f64>) {
        let n = 60;
        let mut x = DMatrix::zeros(n, 3);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let t = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            x[(i, 0)] = 1.0;
            x[(i, 1)] = t;
            x[(i, 2)] = (1.7 * t).sin();
            // deterministic, overlapping labels
            y.push(if (t + 0.8 * (3.1 * t).cos()) > 0.2 { 1.0 } else { 0.0 });
        }
        (x, y)
    }

    #[test]
    fn irls_reaches_first_order_optimality() {
        let (x, y) = logistic_data();
        let fit = fit_regression(Family::Bernoulli, &x, &y, DEFAULT_RIDGE).unwrap();
        assert!(fit.score(&x, &y, DEFAULT_RIDGE).amax() < 1e-8);
        assert!(fit.iterations < MAX_IRLS_ITERATIONS);
    }

    #[test]
    fn fits_are_bit_deterministic() {
        let (x, y) = logistic_data();
        let a = fit_regression(Family::Bernoulli, &x, &y, DEFAULT_RIDGE).unwrap();
        let b = fit_regression(Family::Bernoulli, &x, &y, DEFAULT_RIDGE).unwrap();
        assert_eq!(a.coefficients.as_slice(), b.coefficients.as_slice());
    }

    #[test]
    fn gaussian_ridge_solution_has_zero_score() {
        let (x, y) = logistic_data();
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 0.01 * i as f64).collect();
        let fit = fit_regression(Family::Gaussian, &x, &y, 0.5).unwrap();
        assert!(fit.score(&x, &y, 0.5).amax() < 1e-9);
    }
}
