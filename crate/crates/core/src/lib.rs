//! Capacity planning for distributed stream processing queries.
//!
//! Given the operator graph of a query and a small testbed, `capplan`
//! measures the maximum sustainable throughput (MST) of chosen configurations,
//! optimizes the split of a slot budget across operators, and builds a
//! surrogate model of capacity as a function of memory per slot and slot
//! count. The model answers how many slots, with which memory profile and
//! which per-operator parallelism, sustain a requested rate.
//!
//! The testbed is a deterministic simulator ([`sim`]) driven by a hidden
//! ground truth; planning code only reaches it through [`optimizer::Testbed`].
//!
//! | module | role |
//! |---|---|
//! | [`graph`], [`types`] | query graphs, budgets, configurations, metrics |
//! | [`sim`] | seeded discrete-time testbed |
//! | [`estimator`] | warmup and dichotomous MST search |
//! | [`optimizer`] | max-min slot allocation and single-task metric cache |
//! | [`gp`] | Gaussian process and Expected Improvement |
//! | [`model`] | linear/log/sqrt surrogates, LOOCV, inversion |
//! | [`explorer`] | Bayesian candidate search and planning |
//! | [`scenario`] | scenario, model and CSV file formats |
//! | [`replay`] | published coefficient/table arithmetic check |
//! | [`cli`] | command implementations behind the `capplan` binary |

pub mod cli;
pub mod error;
pub mod estimator;
pub mod explorer;
pub mod gp;
pub mod graph;
pub mod model;
pub mod optimizer;
pub mod replay;
pub mod scenario;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use estimator::{estimate_mst, CeParams};
pub use explorer::{explore, plan, ExplorationReport, ExplorerParams, PlanResult, SearchSpace};
pub use graph::{JobGraph, OperatorId};
pub use model::{CapacityModel, Family, Observation};
pub use optimizer::{bids2, optimize, SingleTaskCache, Testbed, TrueRates};
pub use sim::{GroundTruthSpec, OperatorGroundTruth};
pub use types::{Configuration, MstResult, ResourceBudget, ResourceProfile, UsageMetrics};
