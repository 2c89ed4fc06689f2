//! Surrogate capacity models `λ = a·φ(M) + b·φ(Π) + c`.
//!
//! `φ` is the identity, the natural logarithm or the square root. Models are
//! fitted by ordinary least squares, ranked by leave-one-out RMSE, and chosen
//! for extrapolation by training on the observations with the fewest slots
//! and testing on the rest.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Log,
    Sqrt,
}

impl Family {
    /// Candidate families, in tie-breaking order.
    pub const ALL: [Family; 3] = [Family::Linear, Family::Log, Family::Sqrt];

    pub fn transform(self, x: f64) -> f64 {
        match self {
            Family::Linear => x,
            Family::Log => x.ln(),
            Family::Sqrt => x.sqrt(),
        }
    }

    /// Inverse of [`Family::transform`].
    pub fn untransform(self, y: f64) -> f64 {
        match self {
            Family::Linear => y,
            Family::Log => y.exp(),
            Family::Sqrt => y.max(0.0).powi(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Log => "log",
            Family::Sqrt => "sqrt",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "lin" => Ok(Family::Linear),
            "log" => Ok(Family::Log),
            "sqrt" => Ok(Family::Sqrt),
            other => Err(Error::Format(format!("unknown model family `{other}`"))),
        }
    }
}

/// One measured capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub memory_mb: f64,
    pub task_slots: f64,
    pub mst: f64,
}

impl Observation {
    pub fn new(memory_mb: u32, task_slots: u32, mst: f64) -> Self {
        Observation {
            memory_mb: f64::from(memory_mb),
            task_slots: f64::from(task_slots),
            mst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityModel {
    pub family: Family,
    /// Memory slope.
    pub a: f64,
    /// Slot slope.
    pub b: f64,
    /// Intercept.
    pub c: f64,
}

impl CapacityModel {
    pub fn new(family: Family, a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model coefficient".into()));
        }
        Ok(CapacityModel { family, a, b, c })
    }

    pub fn predict(&self, memory_mb: f64, task_slots: f64) -> f64 {
        self.a * self.family.transform(memory_mb)
            + self.b * self.family.transform(task_slots)
            + self.c
    }

    /// Smallest slot count in `1..=slots_cap` whose predicted capacity
    /// reaches `overprovision · requested_rate`.
    pub fn invert(
        &self,
        memory_mb: f64,
        requested_rate: f64,
        overprovision: f64,
        slots_cap: u32,
    ) -> Result<u32> {
        if !(requested_rate > 0.0) {
            return Err(Error::InvalidParameter("requested rate must be positive".into()));
        }
        let target = overprovision * requested_rate;
        let unreachable = Error::Unreachable {
            target,
            cap: slots_cap,
        };
        let reaches = |p: u32| self.predict(memory_mb, f64::from(p)) >= target;
        if slots_cap == 0 {
            return Err(unreachable);
        }
        if reaches(1) {
            return Ok(1);
        }
        if !(self.b > 0.0) {
            // Non-increasing in the slot count.
            return Err(unreachable);
        }
        // The prediction increases with the slot count, so the first slot
        // count reaching the target follows from the inverse transform,
        // corrected for rounding.
        let t = (target - self.a * self.family.transform(memory_mb) - self.c) / self.b;
        let guess = self.family.untransform(t).ceil();
        if !(guess <= f64::from(slots_cap) + 2.0) {
            return Err(unreachable);
        }
        let mut p = (guess as u32).clamp(2, slots_cap);
        while p > 1 && reaches(p - 1) {
            p -= 1;
        }
        while !reaches(p) {
            if p == slots_cap {
                return Err(unreachable);
            }
            p += 1;
        }
        Ok(p)
    }
}

/// Default over-provisioning factor applied when inverting a model.
pub const DEFAULT_OVERPROVISION: f64 = 1.10;
/// Default upper bound on the slot count searched by [`CapacityModel::invert`].
pub const DEFAULT_SLOTS_CAP: u32 = 10_000;

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Ordinary least squares on `(φ(M), φ(Π), 1)`.
pub fn fit_family(d: &[Observation], family: Family) -> Result<CapacityModel> {
    if d.len() < 3
        || distinct(d.iter().map(|o| o.memory_mb)) < 2
        || distinct(d.iter().map(|o| o.task_slots)) < 2
    {
        return Err(Error::RankDeficient);
    }
    let n = d.len();
    let cols = [
        d.iter().map(|o| family.transform(o.memory_mb)).collect::<Vec<_>>(),
        d.iter().map(|o| family.transform(o.task_slots)).collect(),
        vec![1.0; n],
    ];
    // Columns are scaled to unit max-norm so memory (~10³) and slots (~10¹)
    // do not distort the rank decision.
    let scales: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE))
        .collect();
    let x = DMatrix::from_fn(n, 3, |i, j| cols[j][i] / scales[j]);
    let y = DVector::from_iterator(n, d.iter().map(|o| o.mst));

    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::RankDeficient)?;
    CapacityModel::new(
        family,
        beta[0] / scales[0],
        beta[1] / scales[1],
        beta[2] / scales[2],
    )
}

/// Root mean squared leave-one-out prediction error.
///
/// A fold whose training set is rank deficient contributes the deviation of
/// the held-out target from the mean of the remaining targets.
pub fn loocv_rmse(d: &[Observation], family: Family) -> f64 {
    let n = d.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut sq = 0.0;
    let mut rest = Vec::with_capacity(n - 1);
    for i in 0..n {
        rest.clear();
        rest.extend(d.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, o)| *o));
        let held = d[i];
        let residual = match fit_family(&rest, family) {
            Ok(m) => held.mst - m.predict(held.memory_mb, held.task_slots),
            Err(_) => held.mst - rest.iter().map(|o| o.mst).sum::<f64>() / rest.len() as f64,
        };
        sq += residual * residual;
    }
    (sq / n as f64).sqrt()
}

/// Family with the lowest LOOCV RMSE, and that score.
pub fn best_model(d: &[Observation]) -> (Family, f64) {
    let mut best = (Family::Linear, f64::INFINITY);
    for family in Family::ALL {
        let score = loocv_rmse(d, family);
        if score < best.1 {
            best = (family, score);
        }
    }
    best
}

/// Size of the low-slot training half used by [`select_model`]: `⌈n/2⌉`.
pub fn training_split(n: usize) -> usize {
    n.div_ceil(2)
}

/// Test-set RMSE of every family when trained on the low-slot half.
pub fn extrapolation_scores(d: &[Observation]) -> Result<Vec<(Family, f64)>> {
    if d.len() < 2 {
        return Err(Error::InsufficientObservations(format!(
            "{} observations for model selection",
            d.len()
        )));
    }
    let mut sorted = d.to_vec();
    sorted.sort_by(|x, y| x.task_slots.total_cmp(&y.task_slots));
    let (train, test) = sorted.split_at(training_split(d.len()));
    Family::ALL
        .iter()
        .map(|&family| {
            let m = fit_family(train, family)?;
            let mse = test
                .iter()
                .map(|o| (o.mst - m.predict(o.memory_mb, o.task_slots)).powi(2))
                .sum::<f64>()
                / test.len() as f64;
            Ok((family, mse.sqrt()))
        })
        .collect()
}

/// Family that extrapolates best from low to high slot counts, refitted on all of `d`.
pub fn select_model(d: &[Observation]) -> Result<CapacityModel> {
    let scores = extrapolation_scores(d)?;
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 < best.1 {
            best = s;
        }
    }
    fit_family(d, best.0)
}
