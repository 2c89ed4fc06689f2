use thiserror::Error;

use crate::graph::OperatorId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("job graph contains a cycle")]
    CyclicGraph,
    #[error("operator `{0}` is not connected between source and sink")]
    DisconnectedOperator(OperatorId),
    #[error("job graph has more than one source (extra source `{0}`)")]
    MultipleSources(String),
    #[error("operator `{0}` is declared more than once")]
    DuplicateOperator(OperatorId),
    #[error("edge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("configuration does not match the job graph: {0}")]
    ConfigurationMismatch(String),
    #[error("deployment has {available} ticks of history, {requested} requested")]
    InsufficientHistory { requested: usize, available: usize },
    #[error("configuration never sustained any probed rate (lowest probe {lowest_probe} evt/s)")]
    NeverSucceeded { lowest_probe: f64 },
    #[error("operator `{0}` reported zero busyness")]
    ZeroBusyness(OperatorId),
    #[error("budget of {slots} task slots is below the {operators} operators of the query")]
    InsufficientSlots { slots: u32, operators: usize },
    #[error("kernel matrix is singular even with maximal jitter")]
    SingularKernel,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("model does not reach {target} evt/s within {cap} task slots")]
    Unreachable { target: f64, cap: u32 },
    #[error("not enough observations to build a model: {0}")]
    InsufficientObservations(String),
    #[error("no observation was collected with a {0} MB profile")]
    MissingProfileMetrics(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Format(String),
}
