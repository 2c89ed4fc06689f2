//! Deterministic discrete-time testbed simulator.
//!
//! A [`Deployment`] runs one [`Configuration`] of a query under a hidden
//! [`GroundTruthSpec`]. Time advances in ticks of `tick_seconds`. Each tick
//! the source offers `min(target, max_injectable_rate)` events per second,
//! the pipeline processes as much of the offered load and of the backlog as
//! its bottleneck allows, and whatever is left piles up as pending records.
//!
//! Capacity of a freshly deployed job starts at twice its steady value and
//! relaxes exponentially with time constant `warmup_time_constant_s`. Noise
//! is a pure function of `(seed, tick, operator, channel)`, so replaying a
//! deployment reproduces every metric bit for bit.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JobGraph, Node, OperatorId};
use crate::types::{Configuration, OperatorUsage, ResourceProfile, UsageMetrics};

/// Capacity multiplier of a cold job relative to its steady state.
pub const COLD_START_MULTIPLIER: f64 = 2.0;
/// Simulated cost of (re)deploying a configuration, in seconds.
pub const REDEPLOY_SECONDS: f64 = 60.0;

/// How an operator's aggregate throughput grows with its parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingLaw {
    /// Per-task capacity multiplied by `π^(−scaling_exponent)`.
    #[default]
    Power,
    /// Aggregate capacity `base · max(1, gain · ln(π / pivot))`.
    Logarithmic { gain: f64, pivot: f64 },
}

/// Hidden performance law of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorGroundTruth {
    /// Events/s one task handles at full busyness with enough memory.
    pub base_rate: f64,
    pub memory_knee_mb: f64,
    #[serde(default)]
    pub memory_exponent: f64,
    #[serde(default)]
    pub scaling_exponent: f64,
    #[serde(default)]
    pub skew_factor: f64,
    #[serde(default)]
    pub noise_level: f64,
    /// Events emitted on each outgoing edge per event consumed.
    #[serde(default = "one")]
    pub selectivity: f64,
    #[serde(default)]
    pub scaling_law: ScalingLaw,
}

fn one() -> f64 {
    1.0
}

impl OperatorGroundTruth {
    /// A linear operator: no memory pressure, no skew, no noise.
    pub fn linear(base_rate: f64) -> Self {
        OperatorGroundTruth {
            base_rate,
            memory_knee_mb: 1.0,
            memory_exponent: 0.0,
            scaling_exponent: 0.0,
            skew_factor: 0.0,
            noise_level: 0.0,
            selectivity: 1.0,
            scaling_law: ScalingLaw::Power,
        }
    }

    fn validate(&self, op: &OperatorId) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidParameter(format!(
                "ground truth of `{op}`: {what}"
            )))
        };
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return bad("base_rate must be positive");
        }
        if !(self.memory_knee_mb > 0.0 && self.memory_knee_mb.is_finite()) {
            return bad("memory_knee_mb must be positive");
        }
        if !(self.memory_exponent >= 0.0 && self.memory_exponent.is_finite()) {
            return bad("memory_exponent must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.scaling_exponent) {
            return bad("scaling_exponent must lie in [0, 1)");
        }
        if !(self.skew_factor >= 0.0 && self.skew_factor.is_finite()) {
            return bad("skew_factor must be finite and non-negative");
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise_level must be finite and non-negative");
        }
        if !(self.selectivity > 0.0 && self.selectivity.is_finite()) {
            return bad("selectivity must be positive");
        }
        if let ScalingLaw::Logarithmic { gain, pivot } = self.scaling_law {
            if !(gain > 0.0 && gain.is_finite() && pivot > 0.0 && pivot.is_finite()) {
                return bad("logarithmic gain and pivot must be positive");
            }
        }
        Ok(())
    }
}

/// Hidden description of the simulated query and testbed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSpec {
    graph: JobGraph,
    per_operator: IndexMap<OperatorId, OperatorGroundTruth>,
    pub max_injectable_rate: f64,
    pub warmup_time_constant_s: f64,
    pub tick_seconds: f64,
    ratios: Vec<f64>,
}

impl GroundTruthSpec {
    pub fn new(
        graph: JobGraph,
        per_operator: IndexMap<OperatorId, OperatorGroundTruth>,
        max_injectable_rate: f64,
        warmup_time_constant_s: f64,
        tick_seconds: f64,
    ) -> Result<Self> {
        if !(tick_seconds > 0.0 && tick_seconds.is_finite()) {
            return Err(Error::InvalidParameter("tick_seconds must be positive".into()));
        }
        if !(max_injectable_rate > 0.0 && max_injectable_rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "max_injectable_rate must be positive".into(),
            ));
        }
        if !(warmup_time_constant_s >= 0.0 && warmup_time_constant_s.is_finite()) {
            return Err(Error::InvalidParameter(
                "warmup_time_constant_s must be non-negative".into(),
            ));
        }
        let mut ordered = IndexMap::with_capacity(graph.len());
        for op in graph.operators() {
            let gt = per_operator.get(op).ok_or_else(|| {
                Error::InvalidParameter(format!("no ground truth for operator `{op}`"))
            })?;
            gt.validate(op)?;
            ordered.insert(op.clone(), gt.clone());
        }
        if let Some(extra) = per_operator.keys().find(|k| graph.index_of(k).is_none()) {
            return Err(Error::InvalidParameter(format!(
                "ground truth given for unknown operator `{extra}`"
            )));
        }
        let ratios = path_ratios(&graph, &ordered);
        Ok(GroundTruthSpec {
            graph,
            per_operator: ordered,
            max_injectable_rate,
            warmup_time_constant_s,
            tick_seconds,
            ratios,
        })
    }

    pub fn graph(&self) -> &JobGraph {
        &self.graph
    }

    pub fn operator(&self, op: &OperatorId) -> Option<&OperatorGroundTruth> {
        self.per_operator.get(op)
    }

    pub fn operators(&self) -> impl Iterator<Item = (&OperatorId, &OperatorGroundTruth)> {
        self.per_operator.iter()
    }

    /// Input rate of each operator relative to the source rate, graph order.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    fn truths(&self) -> impl Iterator<Item = &OperatorGroundTruth> {
        self.per_operator.values()
    }
}

/// Sum over inbound paths of the product of selectivities from the source.
fn path_ratios(graph: &JobGraph, truths: &IndexMap<OperatorId, OperatorGroundTruth>) -> Vec<f64> {
    let mut ratio = vec![0.0; graph.len()];
    for &i in graph.topological() {
        ratio[i] = graph
            .edges()
            .iter()
            .filter(|(_, to)| *to == Node::Operator(i))
            .map(|(from, _)| match *from {
                Node::Source => 1.0,
                Node::Operator(j) => ratio[j] * truths[j].selectivity,
                Node::Sink => 0.0,
            })
            .sum();
    }
    ratio
}

/// Steady-state events/s of one task of an operator running with `parallelism` tasks.
///
/// `base · min(1, (M/knee)^γ) · law(π) / (1 + σ·(1 − 1/π))`, where `law(π)`
/// is `π^(−α)` for the power law.
pub fn effective_task_capacity(
    gt: &OperatorGroundTruth,
    profile: ResourceProfile,
    parallelism: u32,
) -> f64 {
    debug_assert!(parallelism >= 1);
    let p = f64::from(parallelism.max(1));
    let memory = (f64::from(profile.memory_mb()) / gt.memory_knee_mb)
        .powf(gt.memory_exponent)
        .min(1.0);
    let scaling = match gt.scaling_law {
        ScalingLaw::Power => p.powf(-gt.scaling_exponent),
        ScalingLaw::Logarithmic { gain, pivot } => (gain * (p / pivot).ln()).max(1.0) / p,
    };
    gt.base_rate * memory * scaling / (1.0 + gt.skew_factor * (1.0 - 1.0 / p))
}

/// Bottleneck throughput of a configuration, capped by the injectable rate.
pub fn true_mst(
    spec: &GroundTruthSpec,
    config: &Configuration,
    profile: ResourceProfile,
) -> Result<f64> {
    let par = config.aligned(&spec.graph)?;
    Ok(pipeline_capacity(spec, &par, profile).min(spec.max_injectable_rate))
}

fn pipeline_capacity(spec: &GroundTruthSpec, par: &[u32], profile: ResourceProfile) -> f64 {
    spec.truths()
        .zip(par)
        .zip(&spec.ratios)
        .map(|((gt, &p), &r)| f64::from(p) * effective_task_capacity(gt, profile, p) / r)
        .fold(f64::INFINITY, f64::min)
}

/// What happened during one tick. Values are as measured, noise included.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub index: u64,
    pub end_s: f64,
    pub target_rate: f64,
    pub offered: f64,
    pub processed: f64,
    pub pending_records: f64,
    pub achieved_ratio: f64,
    pub source_rate: f64,
    pub operator_rates: Vec<f64>,
    pub operator_busyness: Vec<f64>,
    pub task_busyness: Vec<Vec<f64>>,
}

/// Averages over a window of ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub metrics: UsageMetrics,
    pub achieved_ratio: f64,
    pub ratio_stddev: f64,
    pub pending_records: f64,
    pub start_s: f64,
    pub end_s: f64,
}

/// A configuration running on the simulated testbed.
#[derive(Debug, Clone)]
pub struct Deployment<'a> {
    spec: &'a GroundTruthSpec,
    configuration: Configuration,
    profile: ResourceProfile,
    parallelism: Vec<u32>,
    task_capacity: Vec<f64>,
    seed: u64,
    ticks: u64,
    target_rate: f64,
    pending_records: f64,
    cumulative_offered: f64,
    cumulative_processed: f64,
    history: Vec<TickRecord>,
}

/// Starts a cold deployment of `config` with the given profile.
pub fn deploy<'a>(
    spec: &'a GroundTruthSpec,
    config: &Configuration,
    profile: ResourceProfile,
    seed: u64,
) -> Result<Deployment<'a>> {
    let parallelism = config.aligned(&spec.graph)?;
    let task_capacity = spec
        .truths()
        .zip(&parallelism)
        .map(|(gt, &p)| effective_task_capacity(gt, profile, p))
        .collect();
    Ok(Deployment {
        spec,
        configuration: config.clone(),
        profile,
        parallelism,
        task_capacity,
        seed,
        ticks: 0,
        target_rate: 0.0,
        pending_records: 0.0,
        cumulative_offered: 0.0,
        cumulative_processed: 0.0,
        history: Vec::new(),
    })
}

impl Deployment<'_> {
    pub fn configuration(&self) -> &Configuration {
        &self.configuration
    }

    pub fn profile(&self) -> ResourceProfile {
        self.profile
    }

    pub fn clock_s(&self) -> f64 {
        self.ticks as f64 * self.spec.tick_seconds
    }

    pub fn tick_seconds(&self) -> f64 {
        self.spec.tick_seconds
    }

    pub fn max_injectable_rate(&self) -> f64 {
        self.spec.max_injectable_rate
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn pending_records(&self) -> f64 {
        self.pending_records
    }

    pub fn cumulative_offered(&self) -> f64 {
        self.cumulative_offered
    }

    pub fn cumulative_processed(&self) -> f64 {
        self.cumulative_processed
    }

    pub fn history(&self) -> &[TickRecord] {
        &self.history
    }

    pub fn set_target_rate(&mut self, rate: f64) {
        debug_assert!(rate >= 0.0, "negative target rate");
        self.target_rate = if rate.is_finite() { rate.max(0.0) } else { 0.0 };
    }

    /// Number of ticks covering `seconds`, at least one.
    pub fn ticks_for(&self, seconds: f64) -> u64 {
        ((seconds / self.spec.tick_seconds).ceil() as u64).max(1)
    }

    /// Runs for at least `seconds` of simulated time (whole ticks).
    pub fn advance(&mut self, seconds: f64) {
        if seconds > 0.0 {
            self.tick(self.ticks_for(seconds));
        }
    }

    /// Capacity multiplier at simulated time `t`, relaxing from the cold value.
    fn warmup_factor(&self, t: f64) -> f64 {
        let tau = self.spec.warmup_time_constant_s;
        if tau <= 0.0 {
            return 1.0;
        }
        1.0 + (COLD_START_MULTIPLIER - 1.0) * (-t / tau).exp()
    }

    pub fn tick(&mut self, n_ticks: u64) {
        let dt = self.spec.tick_seconds;
        for _ in 0..n_ticks {
            let index = self.ticks;
            let end_s = (index + 1) as f64 * dt;
            let warm = self.warmup_factor(end_s);
            let n = self.parallelism.len();

            // Realized per-task capacity of every operator for this tick.
            let mut realized = Vec::with_capacity(n);
            let mut capacity = self.spec.max_injectable_rate;
            for (i, gt) in self.spec.truths().enumerate() {
                let jitter = 1.0 + gt.noise_level * noise(self.seed, index, i, Channel::Capacity);
                let per_task = self.task_capacity[i] * warm * jitter;
                realized.push(per_task);
                capacity =
                    capacity.min(f64::from(self.parallelism[i]) * per_task / self.spec.ratios[i]);
            }

            let offered = self.target_rate.min(self.spec.max_injectable_rate) * dt;
            let processed = (self.pending_records + offered).min(capacity * dt);
            self.pending_records = (self.pending_records + offered - processed).max(0.0);
            self.cumulative_offered += offered;
            self.cumulative_processed += processed;

            let achieved_ratio = if offered > 0.0 {
                (processed / offered).min(1.0)
            } else {
                1.0
            };
            let source_rate = processed / dt;

            let mut operator_rates = Vec::with_capacity(n);
            let mut operator_busyness = Vec::with_capacity(n);
            let mut task_busyness = Vec::with_capacity(n);
            for (i, gt) in self.spec.truths().enumerate() {
                let p = self.parallelism[i];
                let rate = self.spec.ratios[i] * source_rate;
                let busy = (rate / f64::from(p) / realized[i]).clamp(0.0, 1.0);
                let busy = (busy
                    * (1.0 + gt.noise_level * noise(self.seed, index, i, Channel::Busyness)))
                .clamp(0.0, 1.0);
                let measured_rate =
                    rate * (1.0 + gt.noise_level * noise(self.seed, index, i, Channel::Rate));
                operator_rates.push(measured_rate);
                operator_busyness.push(busy);
                task_busyness.push(spread_over_tasks(busy, p, gt.skew_factor));
            }

            self.ticks += 1;
            self.history.push(TickRecord {
                index,
                end_s,
                target_rate: self.target_rate,
                offered,
                processed,
                pending_records: self.pending_records,
                achieved_ratio,
                source_rate,
                operator_rates,
                operator_busyness,
                task_busyness,
            });
        }
    }

    /// Averages the last `window_ticks` ticks.
    pub fn sample_metrics(&self, window_ticks: usize) -> Result<WindowSample> {
        if window_ticks == 0 || window_ticks > self.history.len() {
            return Err(Error::InsufficientHistory {
                requested: window_ticks,
                available: self.history.len(),
            });
        }
        let window = &self.history[self.history.len() - window_ticks..];
        let len = window_ticks as f64;
        let mean = |f: &dyn Fn(&TickRecord) -> f64| window.iter().map(f).sum::<f64>() / len;

        let achieved_ratio = mean(&|t| t.achieved_ratio);
        let ratio_stddev = (mean(&|t| (t.achieved_ratio - achieved_ratio).powi(2))).sqrt();
        let source_rate = mean(&|t| t.source_rate);

        let mut per_operator = IndexMap::new();
        let mut ratios = IndexMap::new();
        for (i, op) in self.spec.graph.operators().iter().enumerate() {
            let rate = mean(&|t| t.operator_rates[i]);
            let p = self.parallelism[i] as usize;
            let per_task: Vec<f64> = (0..p)
                .map(|k| mean(&|t| t.task_busyness[i][k]))
                .collect();
            let busyness = per_task.iter().sum::<f64>() / p as f64;
            per_operator.insert(
                op.clone(),
                OperatorUsage {
                    actual_input_rate: rate,
                    busyness,
                    per_task_busyness: per_task,
                },
            );
            ratios.insert(
                op.clone(),
                if source_rate > 0.0 { rate / source_rate } else { 0.0 },
            );
        }

        let first = &window[0];
        Ok(WindowSample {
            metrics: UsageMetrics {
                per_operator,
                source_rate,
                ratios,
            },
            achieved_ratio: achieved_ratio.clamp(0.0, 1.0),
            ratio_stddev,
            pending_records: self.pending_records,
            start_s: first.end_s - self.spec.tick_seconds,
            end_s: window[window.len() - 1].end_s,
        })
    }
}

/// Per-task busyness around the operator mean: a symmetric linear spread
/// whose width grows with skew, kept inside `[0, 1]` with the same mean.
fn spread_over_tasks(mean: f64, parallelism: u32, skew: f64) -> Vec<f64> {
    if parallelism == 1 || skew == 0.0 {
        return vec![mean; parallelism as usize];
    }
    let p = f64::from(parallelism);
    let imbalance = skew * (1.0 - 1.0 / p);
    let width = imbalance / (1.0 + imbalance) * mean.min(1.0 - mean);
    (0..parallelism)
        .map(|k| mean + width * (2.0 * f64::from(k) / (p - 1.0) - 1.0))
        .collect()
}

#[derive(Clone, Copy)]
enum Channel {
    Capacity = 0,
    Busyness = 1,
    Rate = 2,
}

/// Standard normal draw truncated to ±3, keyed by its coordinates.
fn noise(seed: u64, tick: u64, operator: usize, channel: Channel) -> f64 {
    let key = splitmix64(
        splitmix64(splitmix64(seed) ^ tick) ^ ((operator as u64) << 8 | channel as u64),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let z: f64 = StandardNormal.sample(&mut rng);
    z.clamp(-3.0, 3.0)
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
