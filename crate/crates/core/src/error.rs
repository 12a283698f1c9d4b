use thiserror::Error;

use crate::model::EdgeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("schedule references unknown edge {0}")]
    DanglingEdge(EdgeId),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Even the minimum-weight schedule exceeds the budget.
    #[error("instance is infeasible: minimum achievable weight {min_weight} exceeds budget {budget}")]
    Infeasible { min_weight: f64, budget: f64 },

    /// The flow network cannot carry one unit per UAV group.
    #[error("required flow {required} exceeds maximum flow {achieved}")]
    FlowInfeasible { required: usize, achieved: usize },

    #[error("certificate invariant violated: {0}")]
    Certificate(String),

    #[error("exact search exceeded its node cap of {cap}")]
    OracleTooLarge { cap: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
