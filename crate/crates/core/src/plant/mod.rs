//! Ground-truth plant simulation, excitation, data collection and lifting.

pub mod bundle;
mod data;
mod excitation;
mod ode;
mod system;

pub use data::{
    collect_pair, lift, lift_states, numeric_rank, richness_check, BatchPair, CollectOptions, DataBatch,
    DataScaling, DerivativeSource, LiftedData, RichnessReport,
};
pub use excitation::{Excitation, ExcitationKind, ExcitationSpec, DEFAULT_MULTISINE_FREQUENCIES};
pub use ode::{rk4, simulate, simulate_from, Trajectory};
pub(crate) use ode::step_count;
pub use system::PolySystem;

use thiserror::Error;

use crate::polyalg::PolyError;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("trajectory became non-finite at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("initial conditions of the two trajectories must differ")]
    IdenticalInitialConditions,
    #[error("monomial {0} of the plant is not in the target dictionary")]
    MissingMonomial(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("bad data file: {0}")]
    Format(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
