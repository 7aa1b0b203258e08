use crate::control_plane::ControlPlaneError;
use crate::coordinator::CoordinatorError;
use crate::data_plane::DataPlaneError;
use crate::facts::{EntityId, FactError, Violation};
use crate::grid::grd1::Grd1Error;
use crate::grid::GridError;
use crate::planner::PlannerError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Grd1(#[from] Grd1Error),
    #[error(transparent)]
    DataPlane(#[from] DataPlaneError),
    #[error(transparent)]
    ControlPlane(#[from] ControlPlaneError),
    #[error("agent {agent}: {source}")]
    Planner {
        agent: EntityId,
        #[source]
        source: PlannerError,
    },
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error("{} shape violation(s); first: {} {}", .0.len(), .0[0].entity, .0[0].reason)]
    Validation(Vec<Violation>),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("committed window {committed} is not before the earliest dirty window {dirty}")]
    CommittedWindowDirty { committed: u32, dirty: u32 },
    #[error("agent {agent}: committed node at window {window} has no feasible continuation")]
    InfeasibleFromPrefix { agent: EntityId, window: u32 },
}

impl Error {
    /// Process exit code: 1 validation, 2 planning infeasibility, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Grd1(_) => 3,
            Error::Planner { .. }
            | Error::Coordinator(_)
            | Error::InfeasibleFromPrefix { .. }
            | Error::ControlPlane(ControlPlaneError::Unreachable { .. }) => 2,
            _ => 1,
        }
    }
}
