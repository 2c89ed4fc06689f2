//! Capacity-model construction and capacity planning.
//!
//! Exploration measures the four corners of the (slots, memory) search space,
//! then lets a Gaussian process over the LOOCV cost of the current best model
//! choose further budgets by Expected Improvement. Each budget is optimized
//! and measured by the configuration optimizer. Exploration stops once the
//! cost worsens sharply after a minimum number of extra points, or at a
//! measurement cap, and the surrogate family that extrapolates best is fitted
//! on all observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::CeParams;
use crate::gp::{self, HyperGrid};
use crate::model::{
    best_model, fit_family, select_model, CapacityModel, Family, Observation, DEFAULT_OVERPROVISION,
};
use crate::optimizer::{bids2, derive_seed, optimize, true_rates_from_metrics, SingleTaskCache, Testbed};
use crate::types::{Configuration, ResourceBudget, ResourceProfile, UsageMetrics};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub pi_min: u32,
    pub pi_max: u32,
    /// Sorted memory profiles, MB per slot.
    pub memory_mb: Vec<u32>,
}

impl SearchSpace {
    /// Memory values from `granularity` to `max_memory` in steps of `granularity`.
    pub fn with_granularity(pi_min: u32, pi_max: u32, granularity: u32, max_memory: u32) -> Self {
        SearchSpace {
            pi_min,
            pi_max,
            memory_mb: (1..=max_memory / granularity.max(1))
                .map(|k| k * granularity)
                .collect(),
        }
    }

    pub fn validate(&self, operators: usize) -> Result<()> {
        if (self.pi_min as usize) < operators {
            return Err(Error::InvalidParameter(format!(
                "search_space: pi_min {} is below the {operators} operators",
                self.pi_min
            )));
        }
        if self.pi_min > self.pi_max {
            return Err(Error::InvalidParameter(
                "search_space: pi_min exceeds pi_max".into(),
            ));
        }
        if self.memory_mb.is_empty() || self.memory_mb.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "search_space: memory_mb must be non-empty and strictly increasing".into(),
            ));
        }
        for &m in &self.memory_mb {
            ResourceProfile::new(m)?;
        }
        Ok(())
    }

    fn m_min(&self) -> u32 {
        self.memory_mb[0]
    }

    fn m_max(&self) -> u32 {
        self.memory_mb[self.memory_mb.len() - 1]
    }

    /// Coordinates of a budget in the unit square.
    pub fn normalize(&self, memory_mb: u32, task_slots: u32) -> [f64; 2] {
        let unit = |v: u32, lo: u32, hi: u32| {
            if hi > lo {
                f64::from(v - lo) / f64::from(hi - lo)
            } else {
                0.0
            }
        };
        [
            unit(memory_mb, self.m_min(), self.m_max()),
            unit(task_slots, self.pi_min, self.pi_max),
        ]
    }

    /// Every `(memory_mb, task_slots)` couple with its normalized coordinates.
    pub fn grid(&self) -> Vec<((u32, u32), [f64; 2])> {
        let mut out = Vec::with_capacity(self.memory_mb.len() * (self.pi_max - self.pi_min + 1) as usize);
        for p in self.pi_min..=self.pi_max {
            for &m in &self.memory_mb {
                out.push(((m, p), self.normalize(m, p)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorerParams {
    pub min_extra_measurements: u32,
    pub rmse_worsen_stop: f64,
    pub max_measurements: u32,
    pub overprovision: f64,
}

impl Default for ExplorerParams {
    fn default() -> Self {
        ExplorerParams {
            min_extra_measurements: 3,
            rmse_worsen_stop: 0.10,
            max_measurements: 20,
            overprovision: DEFAULT_OVERPROVISION,
        }
    }
}

impl ExplorerParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_extra_measurements == 0
            || !(self.rmse_worsen_stop > 0.0)
            || !(self.overprovision > 0.0)
            || self.max_measurements < 4 + self.min_extra_measurements
        {
            return Err(Error::InvalidParameter(
                "explorer_params: values must be positive and max_measurements must allow the corners plus the minimum extra points".into(),
            ));
        }
        Ok(())
    }
}

/// The four corner budgets as `(task_slots, memory_mb)`:
/// low/low, low/high, high/low, high/high.
pub fn bootstrap_corners(space: &SearchSpace) -> [(u32, u32); 4] {
    let (lo, hi) = (space.m_min(), space.m_max());
    [
        (space.pi_min, lo),
        (space.pi_min, hi),
        (space.pi_max, lo),
        (space.pi_max, hi),
    ]
}

/// One entry of the measurement set D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploredPoint {
    pub step: u32,
    pub memory_mb: u32,
    pub task_slots: u32,
    pub mst: f64,
    pub configuration: Configuration,
    pub predicted_rate: f64,
    /// Best-family LOOCV RMSE over D up to and including this point, once
    /// D holds the four corners.
    pub cost: Option<f64>,
    pub family: Option<Family>,
    pub metrics: UsageMetrics,
}

impl ExploredPoint {
    pub fn observation(&self) -> Observation {
        Observation::new(self.memory_mb, self.task_slots, self.mst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CostWorsened,
    MaxMeasurements,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub points: Vec<ExploredPoint>,
    pub model: CapacityModel,
    pub stop_reason: StopReason,
    pub simulated_s: f64,
    pub co_calls: u32,
    pub ce_calls: u32,
    pub params: ExplorerParams,
}

impl ExplorationReport {
    pub fn observations(&self) -> Vec<Observation> {
        self.points.iter().map(ExploredPoint::observation).collect()
    }

    /// Cost recorded at every step, `None` before the corners complete.
    pub fn cost_trajectory(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.cost).collect()
    }
}

pub fn explore<T: Testbed + ?Sized>(
    testbed: &T,
    space: &SearchSpace,
    params: &ExplorerParams,
    ce_params: &CeParams,
    seed: u64,
) -> Result<ExplorationReport> {
    let graph = testbed.graph();
    space.validate(graph.len())?;
    params.validate()?;
    ce_params.validate()?;

    let cache = SingleTaskCache::new();
    let mut points: Vec<ExploredPoint> = Vec::new();
    let mut simulated_s = 0.0;
    let mut ce_calls = 0;
    let mut co_calls = 0;

    let mut evaluate = |slots: u32, memory: u32, force: bool, points: &mut Vec<ExploredPoint>| -> Result<()> {
        let profile = ResourceProfile::new(memory)?;
        let budget = ResourceBudget::new(slots, profile, graph)?;
        let step = points.len() as u32;
        let co = optimize(testbed, budget, ce_params, &cache, force, derive_seed(seed, u64::from(step)))?;
        co_calls += 1;
        ce_calls += co.ce_runs;
        simulated_s += co.simulated_s;
        points.push(ExploredPoint {
            step,
            memory_mb: memory,
            task_slots: slots,
            mst: co.mst.mst,
            configuration: co.configuration,
            predicted_rate: co.predicted_rate,
            cost: None,
            family: None,
            metrics: co.mst.metrics,
        });
        Ok(())
    };

    for (slots, memory) in bootstrap_corners(space) {
        evaluate(slots, memory, slots == space.pi_min, &mut points).map_err(|e| {
            Error::InsufficientObservations(format!("corner ({slots} slots, {memory} MB) failed: {e}"))
        })?;
    }
    let observations = |points: &[ExploredPoint]| points.iter().map(ExploredPoint::observation).collect::<Vec<_>>();
    let (family, cost) = best_model(&observations(&points));
    let last = points.len() - 1;
    points[last].cost = Some(cost);
    points[last].family = Some(family);
    let corner_cost = cost;

    let grid = space.grid();
    let hyper = HyperGrid::default();
    let stop_reason = loop {
        if points.len() >= params.max_measurements as usize {
            break StopReason::MaxMeasurements;
        }
        let training: Vec<([f64; 2], f64)> = points
            .iter()
            .map(|p| (space.normalize(p.memory_mb, p.task_slots), p.cost.unwrap_or(corner_cost)))
            .collect();
        let best_cost = training.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let surrogate = gp::fit(&training, &hyper)?;
        let (memory, slots) = gp::suggest(&surrogate, &grid, best_cost).expect("non-empty grid");

        evaluate(slots, memory, false, &mut points)?;
        let (family, cost) = best_model(&observations(&points));
        let previous = points[points.len() - 2].cost.unwrap_or(corner_cost);
        let last = points.len() - 1;
        points[last].cost = Some(cost);
        points[last].family = Some(family);

        let extra = points.len() - 4;
        if extra >= params.min_extra_measurements as usize
            && cost > previous * (1.0 + params.rmse_worsen_stop)
        {
            break StopReason::CostWorsened;
        }
    };

    let d = observations(&points);
    let model = match select_model(&d) {
        Ok(m) => m,
        // The low-slot half can lack a second memory or slot value.
        Err(Error::RankDeficient) => fit_family(&d, best_model(&d).0)?,
        Err(e) => return Err(e),
    };

    Ok(ExplorationReport {
        points,
        model,
        stop_reason,
        simulated_s,
        co_calls,
        ce_calls,
        params: *params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub memory_mb: u32,
    pub task_slots: u32,
    pub configuration: Configuration,
    /// Model capacity at the planned budget.
    pub predicted_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub requested_rate: f64,
    pub overprovision: f64,
    pub model: CapacityModel,
    pub entries: Vec<PlanEntry>,
}

/// Budget and configuration sustaining `requested_rate` for each profile.
///
/// Slots come from inverting the model with the report's over-provisioning
/// factor. The configuration splits them with the true rates measured at the
/// largest slot count explored with that profile (latest on ties).
pub fn plan(
    report: &ExplorationReport,
    requested_rate: f64,
    profiles: &[ResourceProfile],
    slots_cap: u32,
) -> Result<PlanResult> {
    let mut entries = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let memory = profile.memory_mb();
        let source = report
            .points
            .iter()
            .filter(|p| p.memory_mb == memory)
            .max_by(|a, b| a.task_slots.cmp(&b.task_slots).then(a.step.cmp(&b.step)))
            .ok_or(Error::MissingProfileMetrics(memory))?;
        let slots = report.model.invert(
            f64::from(memory),
            requested_rate,
            report.params.overprovision,
            slots_cap,
        )?;
        let rates = true_rates_from_metrics(&source.metrics)?;
        let operators = rates.len() as u32;
        let (configuration, _) = bids2(&rates, slots.max(operators))?;
        let task_slots = configuration.total_slots();
        entries.push(PlanEntry {
            memory_mb: memory,
            task_slots,
            configuration,
            predicted_rate: report.model.predict(f64::from(memory), f64::from(task_slots)),
        });
    }
    Ok(PlanResult {
        requested_rate,
        overprovision: report.params.overprovision,
        model: report.model,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_in_order() {
        let space = SearchSpace::with_granularity(9, 48, 512, 4096);
        assert_eq!(space.memory_mb.len(), 8);
        assert_eq!(space.grid().len(), 320);
        assert_eq!(
            bootstrap_corners(&space),
            [(9, 512), (9, 4096), (48, 512), (48, 4096)]
        );
    }

    #[test]
    fn degenerate_spaces_collapse_corners() {
        let flat = SearchSpace {
            pi_min: 4,
            pi_max: 4,
            memory_mb: vec![512, 1024],
        };
        let mut c = bootstrap_corners(&flat).to_vec();
        c.dedup();
        c.sort();
        c.dedup();
        assert_eq!(c.len(), 2);

        let one_mem = SearchSpace {
            pi_min: 2,
            pi_max: 8,
            memory_mb: vec![2048],
        };
        let mut c = bootstrap_corners(&one_mem).to_vec();
        c.sort();
        c.dedup();
        assert_eq!(c.len(), 2);
        assert_eq!(one_mem.normalize(2048, 5), [0.0, 0.5]);
    }

    #[test]
    fn space_validation() {
        let s = SearchSpace::with_granularity(3, 10, 512, 2048);
        assert!(s.validate(3).is_ok());
        assert!(s.validate(4).is_err());
        let unsorted = SearchSpace {
            memory_mb: vec![1024, 512],
            ..s.clone()
        };
        assert!(unsorted.validate(1).is_err());
        let inverted = SearchSpace {
            pi_min: 11,
            ..s
        };
        assert!(inverted.validate(1).is_err());
    }
}
