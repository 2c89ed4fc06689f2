//! Optimal configuration of a bounded slot budget.
//!
//! From the usage metrics of a run where every operator has a single task,
//! the optimizer derives each operator's true per-task processing rate `o`
//! and its input ratio `r`, then splits the budget to maximize the source
//! rate `min_i(π_i · o_i / r_i)` under `Σ π_i = budget`. The resulting
//! configuration is measured on the testbed.

use std::collections::HashMap;
use std::sync::RwLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_mst, CeParams};
use crate::graph::{JobGraph, OperatorId};
use crate::sim::GroundTruthSpec;
use crate::types::{Configuration, MstResult, ResourceBudget, ResourceProfile, UsageMetrics};

/// Something that can measure the MST of a configuration.
///
/// Planning code only sees the graph and measurements, never the ground truth.
pub trait Testbed {
    fn graph(&self) -> &JobGraph;

    fn measure(
        &self,
        config: &Configuration,
        profile: ResourceProfile,
        params: &CeParams,
        seed: u64,
    ) -> Result<MstResult>;
}

impl Testbed for GroundTruthSpec {
    fn graph(&self) -> &JobGraph {
        GroundTruthSpec::graph(self)
    }

    fn measure(
        &self,
        config: &Configuration,
        profile: ResourceProfile,
        params: &CeParams,
        seed: u64,
    ) -> Result<MstResult> {
        estimate_mst(self, config, profile, params, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorRate {
    /// True processing rate of one task.
    pub o: f64,
    /// Input rate relative to the source.
    pub r: f64,
}

/// Per-operator true rates, in graph order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrueRates(pub IndexMap<OperatorId, OperatorRate>);

impl TrueRates {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `o = actual_input_rate / busyness`, the rate at full busyness.
///
/// The input rate of an operator is shared by all of its tasks, so the
/// per-task rate divides it by the operator's parallelism.
pub fn true_rates_from_metrics(m: &UsageMetrics) -> Result<TrueRates> {
    let mut rates = IndexMap::with_capacity(m.per_operator.len());
    for (op, usage) in &m.per_operator {
        if !(usage.busyness > 0.0) {
            return Err(Error::ZeroBusyness(op.clone()));
        }
        let tasks = usage.per_task_busyness.len().max(1) as f64;
        let r = m.ratios.get(op).copied().unwrap_or(0.0);
        if !(r > 0.0) {
            return Err(Error::ZeroBusyness(op.clone()));
        }
        rates.insert(
            op.clone(),
            OperatorRate {
                o: usage.actual_input_rate / tasks / usage.busyness,
                r,
            },
        );
    }
    Ok(TrueRates(rates))
}

/// Max-min split of `budget_slots` across operators.
///
/// Greedy water-filling: every operator starts with one task and each
/// remaining slot goes to the operator with the lowest `π·o/r` (first in
/// graph order on ties). Returns the configuration and its predicted source
/// rate.
pub fn bids2(rates: &TrueRates, budget_slots: u32) -> Result<(Configuration, f64)> {
    let n = rates.len();
    if n == 0 || (budget_slots as usize) < n {
        return Err(Error::InsufficientSlots {
            slots: budget_slots,
            operators: n,
        });
    }
    let unit: Vec<f64> = rates.0.values().map(|x| x.o / x.r).collect();
    let mut par = vec![1u32; n];
    for _ in n as u32..budget_slots {
        let mut low = 0;
        for i in 1..n {
            if f64::from(par[i]) * unit[i] < f64::from(par[low]) * unit[low] {
                low = i;
            }
        }
        par[low] += 1;
    }
    let lambda = par
        .iter()
        .zip(&unit)
        .map(|(&p, &u)| f64::from(p) * u)
        .fold(f64::INFINITY, f64::min);
    let config = Configuration::new(rates.0.keys().cloned().zip(par).collect())?;
    Ok((config, lambda))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    graph: String,
    profile: ResourceProfile,
    params: [u64; 8],
}

impl CacheKey {
    fn new(graph: &JobGraph, profile: ResourceProfile, p: &CeParams) -> Self {
        CacheKey {
            graph: graph.fingerprint(),
            profile,
            params: [
                p.warmup_s.to_bits(),
                p.cooldown_s.to_bits(),
                p.cooldown_rate.to_bits(),
                p.rampup_s.to_bits(),
                p.observe_s.to_bits(),
                p.success_threshold.to_bits(),
                p.sensibility.to_bits(),
                u64::from(p.max_iterations),
            ],
        }
    }
}

/// Single-task usage metrics per (graph, profile, estimator parameters).
#[derive(Debug, Default)]
pub struct SingleTaskCache {
    entries: RwLock<HashMap<CacheKey, UsageMetrics>>,
}

impl SingleTaskCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        graph: &JobGraph,
        profile: ResourceProfile,
        params: &CeParams,
    ) -> Option<UsageMetrics> {
        let key = CacheKey::new(graph, profile, params);
        self.entries.read().expect("cache lock").get(&key).cloned()
    }

    pub fn insert(
        &self,
        graph: &JobGraph,
        profile: ResourceProfile,
        params: &CeParams,
        metrics: UsageMetrics,
    ) {
        let key = CacheKey::new(graph, profile, params);
        self.entries.write().expect("cache lock").insert(key, metrics);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoResult {
    pub configuration: Configuration,
    pub predicted_rate: f64,
    pub mst: MstResult,
    /// Estimator runs spent, single-task run included.
    pub ce_runs: u32,
    pub simulated_s: f64,
}

/// Optimal configuration for `budget`, measured in situ.
///
/// `seed` is split into independent streams for the single-task run and the
/// run of the optimized configuration.
pub fn optimize<T: Testbed + ?Sized>(
    testbed: &T,
    budget: ResourceBudget,
    params: &CeParams,
    cache: &SingleTaskCache,
    force_single_task: bool,
    seed: u64,
) -> Result<CoResult> {
    let graph = testbed.graph();
    if (budget.task_slots as usize) < graph.len() {
        return Err(Error::InsufficientSlots {
            slots: budget.task_slots,
            operators: graph.len(),
        });
    }
    let mut ce_runs = 0;
    let mut simulated_s = 0.0;
    let cached = if force_single_task {
        None
    } else {
        cache.get(graph, budget.profile, params)
    };
    let single = match cached {
        Some(m) => m,
        None => {
            let run = testbed.measure(
                &Configuration::single_task(graph),
                budget.profile,
                params,
                derive_seed(seed, 0),
            )?;
            ce_runs += 1;
            simulated_s += run.simulated_s;
            cache.insert(graph, budget.profile, params, run.metrics.clone());
            run.metrics
        }
    };

    let rates = true_rates_from_metrics(&single)?;
    let (configuration, predicted_rate) = bids2(&rates, budget.task_slots)?;
    let mst = testbed.measure(&configuration, budget.profile, params, derive_seed(seed, 1))?;
    ce_runs += 1;
    simulated_s += mst.simulated_s;
    Ok(CoResult {
        configuration,
        predicted_rate,
        mst,
        ce_runs,
        simulated_s,
    })
}

/// Independent seed stream `k` derived from `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    crate::sim::splitmix64(crate::sim::splitmix64(seed) ^ k.wrapping_mul(0xA24B_AED4_963E_E407))
}
