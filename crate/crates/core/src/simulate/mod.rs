//! Scenario catalog, data generation, and Monte Carlo sweeps.

mod rng;
mod scenarios;
mod sweep;

use thiserror::Error;

use crate::combine::CombineError;
use crate::data::DataError;

pub use rng::{rep_seed, splitmix64, SimRng};
pub use scenarios::{
    generate, generate_detailed, GeneratedSample, Latents, ScenarioConfig, ScenarioFamily, ScenarioId, INSTRUMENT,
    MEDIATOR, OUTCOME, TREATMENT,
};
pub use sweep::{
    parse_models, run_sweep, run_sweep_with, summarize, Execution, RejectionRow, RejectionTable, SweepConfig,
    DEFAULT_N_GRID, REJECTION_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("unknown scenario `{0}` (run `evfactors scenarios` for the list)")]
    UnknownScenario(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model `{model}` does not fit scenario {scenario}: {source}")]
    IncompatibleModel {
        scenario: String,
        model: String,
        #[source]
        source: DataError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
