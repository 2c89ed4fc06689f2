//! Resource and measurement value types shared by every stage of the planner.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JobGraph, OperatorId};

/// Default memory granularity of a task slot profile.
pub const DEFAULT_GRANULARITY_MB: u32 = 512;

/// Memory given to each task slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceProfile {
    memory_mb: u32,
}

impl ResourceProfile {
    pub fn new(memory_mb: u32) -> Result<Self> {
        Self::with_granularity(memory_mb, DEFAULT_GRANULARITY_MB)
    }

    pub fn with_granularity(memory_mb: u32, granularity_mb: u32) -> Result<Self> {
        if memory_mb == 0 || granularity_mb == 0 || memory_mb % granularity_mb != 0 {
            return Err(Error::InvalidParameter(format!(
                "memory profile {memory_mb} MB is not a positive multiple of {granularity_mb} MB"
            )));
        }
        Ok(ResourceProfile { memory_mb })
    }

    pub fn memory_mb(self) -> u32 {
        self.memory_mb
    }
}

/// A number of task slots sharing one profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub task_slots: u32,
    pub profile: ResourceProfile,
}

impl ResourceBudget {
    pub fn new(task_slots: u32, profile: ResourceProfile, graph: &JobGraph) -> Result<Self> {
        if (task_slots as usize) < graph.len() {
            return Err(Error::InsufficientSlots {
                slots: task_slots,
                operators: graph.len(),
            });
        }
        Ok(ResourceBudget {
            task_slots,
            profile,
        })
    }
}

/// Parallelism of every operator, in graph order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    parallelism: IndexMap<OperatorId, u32>,
}

impl Configuration {
    pub fn new(parallelism: IndexMap<OperatorId, u32>) -> Result<Self> {
        if let Some((op, _)) = parallelism.iter().find(|(_, &p)| p == 0) {
            return Err(Error::ConfigurationMismatch(format!(
                "operator `{op}` has parallelism 0"
            )));
        }
        Ok(Configuration { parallelism })
    }

    /// Builds a configuration from values listed in graph order.
    pub fn from_values(graph: &JobGraph, values: &[u32]) -> Result<Self> {
        if values.len() != graph.len() {
            return Err(Error::ConfigurationMismatch(format!(
                "{} parallelism values for {} operators",
                values.len(),
                graph.len()
            )));
        }
        Configuration::new(
            graph
                .operators()
                .iter()
                .cloned()
                .zip(values.iter().copied())
                .collect(),
        )
    }

    /// Every operator with parallelism 1.
    pub fn single_task(graph: &JobGraph) -> Self {
        Configuration {
            parallelism: graph.operators().iter().map(|o| (o.clone(), 1)).collect(),
        }
    }

    pub fn get(&self, op: &OperatorId) -> Option<u32> {
        self.parallelism.get(op).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OperatorId, u32)> {
        self.parallelism.iter().map(|(k, &v)| (k, v))
    }

    pub fn total_slots(&self) -> u32 {
        self.parallelism.values().sum()
    }

    /// Parallelism values aligned with the graph's operator order.
    pub fn aligned(&self, graph: &JobGraph) -> Result<Vec<u32>> {
        self.check_covers(graph)?;
        Ok(graph
            .operators()
            .iter()
            .map(|o| self.parallelism[o])
            .collect())
    }

    pub fn check_covers(&self, graph: &JobGraph) -> Result<()> {
        if self.parallelism.len() != graph.len() {
            return Err(Error::ConfigurationMismatch(format!(
                "{} entries for {} operators",
                self.parallelism.len(),
                graph.len()
            )));
        }
        for op in graph.operators() {
            if !self.parallelism.contains_key(op) {
                return Err(Error::ConfigurationMismatch(format!(
                    "operator `{op}` missing"
                )));
            }
        }
        Ok(())
    }
}

/// Windowed usage of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorUsage {
    /// Events per second entering the operator (all tasks).
    pub actual_input_rate: f64,
    /// Mean busyness over the operator's tasks.
    pub busyness: f64,
    pub per_task_busyness: Vec<f64>,
}

impl OperatorUsage {
    pub fn max_task_busyness(&self) -> f64 {
        self.per_task_busyness.iter().copied().fold(0.0, f64::max)
    }
}

/// Usage metrics collected during one observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageMetrics {
    pub per_operator: IndexMap<OperatorId, OperatorUsage>,
    pub source_rate: f64,
    /// Operator input rate divided by the source rate.
    pub ratios: IndexMap<OperatorId, f64>,
}

/// Outcome of a capacity estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstResult {
    /// Maximum sustainable throughput, events per second.
    pub mst: f64,
    pub achieved_ratio: f64,
    pub ratio_stddev: f64,
    pub metrics: UsageMetrics,
    pub iterations_used: u32,
    pub source_saturated: bool,
    /// Simulated testbed time spent, redeployment included.
    pub simulated_s: f64,
}
