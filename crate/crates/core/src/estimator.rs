//! Experimental measurement of the maximum sustainable throughput (MST).
//!
//! After a warmup at the maximal injectable rate, the estimator bisects
//! between the highest rate known to be sustained (`min_r`, initially 0) and
//! the lowest rate known to fail (`max_r`, initially unbounded). The first
//! probe is the maximal injectable rate. Every probe is a measurement made of
//! a cooldown at a low rate, a ramp-up at the probed rate that is not
//! observed, and an observation window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{deploy, Deployment, GroundTruthSpec, REDEPLOY_SECONDS};
use crate::types::{Configuration, MstResult, ResourceProfile, UsageMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CeParams {
    pub warmup_s: f64,
    pub cooldown_s: f64,
    pub cooldown_rate: f64,
    pub rampup_s: f64,
    pub observe_s: f64,
    pub success_threshold: f64,
    pub sensibility: f64,
    pub max_iterations: u32,
}

impl Default for CeParams {
    fn default() -> Self {
        CeParams {
            warmup_s: 120.0,
            cooldown_s: 15.0,
            cooldown_rate: 6400.0,
            rampup_s: 60.0,
            observe_s: 15.0,
            success_threshold: 0.99,
            sensibility: 0.01,
            max_iterations: 8,
        }
    }
}

impl CeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("ce_params: {m}")));
        if !(self.success_threshold > 0.0 && self.success_threshold < 1.0) {
            return bad("success_threshold must lie in (0, 1)");
        }
        if !(self.sensibility > 0.0 && self.sensibility < 1.0) {
            return bad("sensibility must lie in (0, 1)");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        let durations = [self.warmup_s, self.cooldown_s, self.rampup_s];
        if durations.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("phase durations must be non-negative");
        }
        if !(self.observe_s > 0.0 && self.observe_s.is_finite()) {
            return bad("observe_s must be positive");
        }
        if !(self.cooldown_rate >= 0.0 && self.cooldown_rate.is_finite()) {
            return bad("cooldown_rate must be non-negative");
        }
        Ok(())
    }
}

/// Statistics of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub rate: f64,
    pub achieved_ratio: f64,
    pub ratio_stddev: f64,
    pub metrics: UsageMetrics,
    /// Simulated time at which the ramp-up and the observation started.
    pub rampup_start_s: f64,
    pub observe_start_s: f64,
    pub observe_end_s: f64,
}

/// Cooldown, ramp-up, then observation of the achieved rate at `rate`.
pub fn run_measurement(d: &mut Deployment<'_>, rate: f64, params: &CeParams) -> Result<Measurement> {
    d.set_target_rate(params.cooldown_rate);
    d.advance(params.cooldown_s);
    d.set_target_rate(rate);
    let rampup_start_s = d.clock_s();
    d.advance(params.rampup_s);
    let observe_start_s = d.clock_s();
    let window = d.ticks_for(params.observe_s);
    d.tick(window);
    let sample = d.sample_metrics(window as usize)?;
    Ok(Measurement {
        rate,
        achieved_ratio: sample.achieved_ratio,
        ratio_stddev: sample.ratio_stddev,
        metrics: sample.metrics,
        rampup_start_s,
        observe_start_s,
        observe_end_s: sample.end_s,
    })
}

/// Every probe of a search, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub probes: Vec<Measurement>,
    pub successes: Vec<bool>,
    /// `(min_r, max_r)` after each probe.
    pub brackets: Vec<(f64, f64)>,
}

pub fn estimate_mst(
    spec: &GroundTruthSpec,
    config: &Configuration,
    profile: ResourceProfile,
    params: &CeParams,
    seed: u64,
) -> Result<MstResult> {
    estimate_mst_traced(spec, config, profile, params, seed).map(|(r, _)| r)
}

/// [`estimate_mst`] that also returns the probe sequence.
pub fn estimate_mst_traced(
    spec: &GroundTruthSpec,
    config: &Configuration,
    profile: ResourceProfile,
    params: &CeParams,
    seed: u64,
) -> Result<(MstResult, SearchTrace)> {
    params.validate()?;
    let mut d = deploy(spec, config, profile, seed)?;
    let cap = d.max_injectable_rate();

    d.set_target_rate(cap);
    d.advance(params.warmup_s);

    let mut min_r = 0.0_f64;
    let mut max_r = f64::INFINITY;
    let mut target = cap;
    let mut best: Option<Measurement> = None;
    let mut saturated = false;
    let mut trace = SearchTrace {
        probes: Vec::new(),
        successes: Vec::new(),
        brackets: Vec::new(),
    };

    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let m = run_measurement(&mut d, target, params)?;
        let ok = m.achieved_ratio >= params.success_threshold;
        if ok {
            min_r = target;
            if iterations == 1 {
                saturated = true;
            }
        } else {
            max_r = target;
        }
        trace.successes.push(ok);
        trace.brackets.push((min_r, max_r));
        if ok {
            best = Some(m.clone());
        }
        trace.probes.push(m);

        if max_r.is_infinite() {
            // The injectable rate itself is sustained; nothing higher to probe.
            break;
        }
        let next = (min_r + max_r) / 2.0;
        if (next - target).abs() <= params.sensibility * target {
            break;
        }
        target = next;
    }

    let Some(best) = best else {
        return Err(Error::NeverSucceeded {
            lowest_probe: target,
        });
    };
    Ok((
        MstResult {
            mst: min_r,
            achieved_ratio: best.achieved_ratio,
            ratio_stddev: best.ratio_stddev,
            metrics: best.metrics,
            iterations_used: iterations,
            source_saturated: saturated,
            simulated_s: d.clock_s() + REDEPLOY_SECONDS,
        },
        trace,
    ))
}
