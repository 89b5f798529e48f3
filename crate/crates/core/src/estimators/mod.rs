//! The three point estimators with their estimated influence values.
//!
//! Each estimator is the sample mean of per-row uncentered influence
//! contributions, so the reported influence values are those contributions
//! minus the estimate. The contribution formulas are exposed as pure
//! functions of the nuisance values so they can be checked by hand.

mod backdoor;
mod frontdoor;
mod iv;
mod wald;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::data::{validate_spec, DataError, ModelKind, ModelSpec, ObservationTable};
use crate::nuisance::{BasisExpansion, NuisanceError, DEFAULT_RIDGE, PROBABILITY_CLAMP};

pub use backdoor::{backdoor_contributions, estimate_backdoor_aipw, estimate_backdoor_aipw_with};
pub use frontdoor::{
    estimate_frontdoor_apipw, estimate_frontdoor_apipw_with, frontdoor_contribution, FrontDoorNuisances,
};
pub use iv::{estimate_iv_wald, iv_contributions};
pub use wald::{wald_interval, WaldInterval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("model `{label}` is a {found} model, expected {expected}")]
    WrongKind {
        label: String,
        expected: ModelKind,
        found: ModelKind,
    },
    #[error("treatment is constant; both arms need observations")]
    AllTreatedOrAllControl,
    #[error("mediator is constant")]
    MediatorConstant,
    #[error("instrument is constant")]
    InstrumentConstant,
    #[error("instrument does not move treatment: P(A=1|Z=1) equals P(A=1|Z=0)")]
    WeakInstrumentDegenerate,
    #[error("influence values are all zero; standard error is undefined")]
    DegenerateVariance,
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("probability clamp must lie in [0, 0.5), got {0}")]
    InvalidClamp(f64),
    #[error("estimator produced non-finite influence values")]
    NonFinite,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nuisance(#[from] NuisanceError),
}

/// Tuning shared by the regression-based estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub ridge: f64,
    /// Fitted propensities are clamped to `[c, 1 - c]`.
    pub propensity_clamp: f64,
    /// Fitted mediator probabilities are clamped to `[c, 1 - c]`.
    pub mediator_clamp: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            propensity_clamp: PROBABILITY_CLAMP,
            mediator_clamp: PROBABILITY_CLAMP,
        }
    }
}

impl EstimatorOptions {
    fn validate(&self) -> Result<(), EstimatorError> {
        for clamp in [self.propensity_clamp, self.mediator_clamp] {
            if !(0.0..0.5).contains(&clamp) {
                return Err(EstimatorError::InvalidClamp(clamp));
            }
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(NuisanceError::InvalidRidge(self.ridge).into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub label: String,
    pub psi_hat: f64,
    /// Centered influence values, one per row.
    pub if_values: Vec<f64>,
    /// (nuisance name, basis used) pairs.
    pub nuisance_report: Vec<(String, String)>,
}

impl EstimatorOutput {
    pub fn n(&self) -> usize {
        self.if_values.len()
    }

    /// Builds the output from uncentered contributions.
    pub(crate) fn from_contributions(
        label: String,
        contributions: Vec<f64>,
        nuisance_report: Vec<(String, String)>,
    ) -> Result<Self, EstimatorError> {
        if contributions.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
        let psi_hat = crate::stats::mean(&contributions);
        let if_values = contributions.into_iter().map(|v| v - psi_hat).collect();
        Ok(Self {
            label,
            psi_hat,
            if_values,
            nuisance_report,
        })
    }
}

/// Runs whichever estimator `spec.kind` names.
pub fn estimate(
    table: &ObservationTable,
    spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<EstimatorOutput, EstimatorError> {
    match spec.kind {
        ModelKind::Backdoor => estimate_backdoor_aipw_with(table, spec, options),
        ModelKind::FrontDoor => estimate_frontdoor_apipw_with(table, spec, options),
        ModelKind::Iv => estimate_iv_wald(table, spec),
    }
}

fn check_kind(spec: &ModelSpec, expected: ModelKind) -> Result<(), EstimatorError> {
    if spec.kind != expected {
        return Err(EstimatorError::WrongKind {
            label: spec.label(),
            expected,
            found: spec.kind,
        });
    }
    Ok(())
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// Covariate basis for one model's adjustment set, fixed on the observed
/// sample so that counterfactual designs reuse the same knots.
pub(crate) struct AdjustmentBasis<'a> {
    n: usize,
    columns: Vec<&'a [f64]>,
    spec_label: String,
    expansion: Option<BasisExpansion>,
}

impl<'a> AdjustmentBasis<'a> {
    fn new(table: &'a ObservationTable, spec: &ModelSpec, binary_names: &[&str]) -> Result<Self, EstimatorError> {
        validate_spec(table, spec)?;
        let columns = table.adjustment_columns(&spec.adjustment)?;
        let binary_names: Vec<String> = binary_names.iter().map(|s| s.to_string()).collect();
        let expansion = if columns.is_empty() && binary_names.is_empty() {
            None
        } else {
            Some(BasisExpansion::fit(
                &columns,
                &spec.adjustment,
                &binary_names,
                spec.basis,
            )?)
        };
        Ok(Self {
            n: table.n_rows(),
            columns,
            spec_label: spec.basis.to_string(),
            expansion,
        })
    }

    /// Design with the given values for the binary (treatment/mediator) columns.
    fn design(&self, binaries: &[&[f64]]) -> Result<DMatrix<f64>, EstimatorError> {
        match &self.expansion {
            Some(e) => Ok(e.design(&self.columns, binaries)?),
            None => Ok(DMatrix::from_element(self.n, 1, 1.0)),
        }
    }
}
