//! Testing a causal null hypothesis across several candidate causal models.
//!
//! Each candidate model (backdoor, front-door, instrumental variable) yields
//! an asymptotically linear estimator of the average causal effect together
//! with its estimated influence function. The product statistic
//!
//! ```text
//! T_n = sqrt(n) * prod_k psi_k / sqrt(gamma' Sigma gamma),   gamma_k = prod_{j != k} psi_j
//! ```
//!
//! is asymptotically standard normal whenever at least one candidate model is
//! correct and the null holds, so the test stays valid without knowing which
//! model is the right one.
//!
//! Layout:
//!
//! * [`data`]: observed tables, column mappings, and model specifications.
//! * [`nuisance`]: basis expansions and ridge-penalized linear/logistic fits.
//! * [`estimators`]: backdoor AIPW, front-door augmented IPW, IV Wald.
//! * [`combine`]: joint influence matrix, covariance, and the product test.
//! * [`simulate`]: the data-generating scenario catalog and Monte Carlo sweeps.

pub mod combine;
pub mod data;
pub mod estimators;
pub mod keyvalue;
pub mod nuisance;
pub mod simulate;
pub mod stats;

use thiserror::Error;

pub use combine::{
    analyze_all, estimate_covariance, joint, product_test, Analysis, CovarianceEstimate, JointEstimate,
    ProductTestResult,
};
pub use data::{load_csv, validate_spec, ColumnMapping, ModelKind, ModelSpec, ObservationTable};
pub use estimators::{
    estimate, estimate_backdoor_aipw, estimate_frontdoor_apipw, estimate_iv_wald, wald_interval, EstimatorOptions,
    EstimatorOutput, WaldInterval,
};
pub use nuisance::{BasisKind, BasisSpec, Family, FittedRegression};
pub use simulate::{
    generate, run_sweep, summarize, RejectionRow, RejectionTable, ScenarioConfig, ScenarioId, SweepConfig,
};

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Nuisance(#[from] nuisance::NuisanceError),
    #[error(transparent)]
    Estimator(#[from] estimators::EstimatorError),
    #[error(transparent)]
    Combine(#[from] combine::CombineError),
    #[error(transparent)]
    Simulate(#[from] simulate::SimulateError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
