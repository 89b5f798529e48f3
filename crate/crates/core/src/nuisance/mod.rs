//! Nuisance regressions: outcome regressions, propensity scores, and the
//! mediator law, fit by ridge-penalized least squares or logistic IRLS on an
//! expanded covariate basis.

mod basis;
mod regression;

use thiserror::Error;

pub use basis::{expand_basis, BasisExpansion, BasisKind, BasisSpec};
pub use regression::{
    fit_regression, Family, FittedRegression, DEFAULT_RIDGE, IRLS_TOLERANCE, MAX_IRLS_ITERATIONS, PROBABILITY_CLAMP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NuisanceError {
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("IRLS did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Bernoulli response must be 0 or 1 (row {0})")]
    NonBinaryResponse(usize),
    #[error("ridge penalty must be finite and non-negative, got {0}")]
    InvalidRidge(f64),
    #[error("covariate `{0}` is constant; a spline basis cannot be placed on it")]
    DegenerateCovariate(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("fit produced non-finite coefficients")]
    NonFinite,
    #[error("empty design")]
    EmptyDesign,
}
