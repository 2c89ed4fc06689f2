//! Persisted artifacts: scenario files, model files, measurement CSV and
//! plan tables.
//!
//! Scenarios and models are TOML documents carrying a `schema_version`.
//! Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::CeParams;
use crate::explorer::{ExplorationReport, ExplorerParams, PlanResult, SearchSpace};
use crate::graph::{JobGraph, OperatorId};
use crate::model::{CapacityModel, Family};
use crate::sim::{GroundTruthSpec, OperatorGroundTruth};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub operators: Vec<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedSection {
    pub max_injectable_rate: f64,
    #[serde(default = "default_tick")]
    pub tick_seconds: f64,
    #[serde(default)]
    pub warmup_time_constant_s: f64,
}

fn default_tick() -> f64 {
    5.0
}

/// Defaults for the `plan` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub requested_rate: f64,
    #[serde(default)]
    pub profiles: Vec<u32>,
    #[serde(default = "default_slots_cap")]
    pub slots_cap: u32,
}

fn default_slots_cap() -> u32 {
    crate::model::DEFAULT_SLOTS_CAP
}

/// Raw scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSection,
    pub ground_truth: IndexMap<String, OperatorGroundTruth>,
    pub testbed: TestbedSection,
    #[serde(default)]
    pub ce_params: CeParams,
    pub search_space: SearchSpace,
    #[serde(default)]
    pub explorer_params: ExplorerParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSection>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub spec: GroundTruthSpec,
    pub ce_params: CeParams,
    pub search_space: SearchSpace,
    pub explorer_params: ExplorerParams,
    pub plan: Option<PlanSection>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Format(format!("scenario: {e}")))?;
        Scenario::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_toml(&text)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                file.schema_version
            )));
        }
        let operators: Vec<OperatorId> = file.graph.operators.iter().map(OperatorId::new).collect();
        let graph = JobGraph::new(operators, &file.graph.edges)?;
        let per_operator = file
            .ground_truth
            .into_iter()
            .map(|(k, v)| (OperatorId::new(k), v))
            .collect();
        let spec = GroundTruthSpec::new(
            graph,
            per_operator,
            file.testbed.max_injectable_rate,
            file.testbed.warmup_time_constant_s,
            file.testbed.tick_seconds,
        )?;
        file.ce_params.validate()?;
        file.search_space.validate(spec.graph().len())?;
        file.explorer_params.validate()?;
        if let Some(plan) = &file.plan {
            if !(plan.requested_rate > 0.0) {
                return Err(Error::InvalidParameter("plan: requested_rate must be positive".into()));
            }
        }
        Ok(Scenario {
            name: file.name,
            seed: file.seed,
            spec,
            ce_params: file.ce_params,
            search_space: file.search_space,
            explorer_params: file.explorer_params,
            plan: file.plan,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    family: Family,
    a: f64,
    b: f64,
    c: f64,
}

pub fn model_to_toml(model: &CapacityModel) -> String {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        family: model.family,
        a: model.a,
        b: model.b,
        c: model.c,
    };
    toml::to_string(&file).expect("model serializes")
}

pub fn model_from_toml(text: &str) -> Result<CapacityModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Format(format!("model: {e}")))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "schema_version: expected {SCHEMA_VERSION}, found {}",
            file.schema_version
        )));
    }
    CapacityModel::new(file.family, file.a, file.b, file.c)
}

pub const CSV_HEADER: &str = "step,memory_mb,task_slots,mst,cost_rmse,family";

/// One row per measurement of D. Floats use the shortest representation
/// that round-trips; an empty field means "not yet defined".
pub fn measurements_csv(report: &ExplorationReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &report.points {
        let cost = p.cost.map(|c| format!("{c:?}")).unwrap_or_default();
        let family = p.family.map(|f| f.name()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:?},{},{}",
            p.step, p.memory_mb, p.task_slots, p.mst, cost, family
        );
    }
    out
}

/// Human-readable plan: one row per memory profile.
pub fn plan_table(plan: &PlanResult) -> String {
    let m = &plan.model;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "requested rate {} evt/s, provisioned for {:.0}%",
        plan.requested_rate,
        plan.overprovision * 100.0
    );
    let _ = writeln!(out, "model {} a={:e} b={:e} c={:e}", m.family, m.a, m.b, m.c);
    let _ = writeln!(
        out,
        "{:>10}  {:>10}  {:>16}  configuration",
        "memory_mb", "task_slots", "predicted_evt_s"
    );
    for e in &plan.entries {
        let config = e
            .configuration
            .iter()
            .map(|(op, p)| format!("{op}={p}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{:>10}  {:>10}  {:>16.0}  {}",
            e.memory_mb, e.task_slots, e.predicted_rate, config
        );
    }
    out
}
