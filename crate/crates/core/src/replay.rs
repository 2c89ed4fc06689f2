//! Replays published capacity models against their published plans.
//!
//! Each fixture holds the printed model coefficients of a query and the slot
//! counts planned for each memory profile. The replay inverts the model with
//! the default over-provisioning factor and compares.

use std::fmt;

use crate::model::{CapacityModel, Family, DEFAULT_OVERPROVISION, DEFAULT_SLOTS_CAP};

pub const PROFILES_MB: [u32; 4] = [512, 1024, 2048, 4096];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Relative deviation from the published count.
    Relative(f64),
    /// Absolute deviation in slots.
    Slots(u32),
    /// Reported without a verdict.
    Informational,
}

impl Tolerance {
    fn accepts(self, planned: u32, published: u32) -> Option<bool> {
        let diff = f64::from(planned.abs_diff(published));
        match self {
            Tolerance::Relative(r) => Some(diff <= r * f64::from(published)),
            Tolerance::Slots(s) => Some(planned.abs_diff(published) <= s),
            Tolerance::Informational => None,
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Relative(r) => write!(f, "±{}%", r * 100.0),
            Tolerance::Slots(s) => write!(f, "±{s} slots"),
            Tolerance::Informational => f.write_str("info"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixture {
    pub query: &'static str,
    pub model: CapacityModel,
    pub requested_rate: f64,
    /// Published slot counts for 0.5, 1, 2 and 4 GB.
    pub published: [Option<u32>; 4],
    pub tolerance: Tolerance,
    /// Overrides the tolerance for individual profiles.
    pub exact_at: Option<u32>,
}

const fn model(family: Family, a: f64, b: f64, c: f64) -> CapacityModel {
    CapacityModel { family, a, b, c }
}

pub const FIXTURES: [Fixture; 5] = [
    Fixture {
        query: "q1",
        model: model(Family::Linear, 1.0, 9.9e5, -7.6e5),
        requested_rate: 160e6,
        published: [Some(179), Some(179), Some(179), Some(178)],
        tolerance: Tolerance::Relative(0.02),
        exact_at: Some(512),
    },
    Fixture {
        query: "q2",
        model: model(Family::Linear, 7.5, 3.0e6, -2.7e6),
        requested_rate: 190e6,
        published: [Some(69), Some(69), Some(69), Some(69)],
        tolerance: Tolerance::Slots(3),
        exact_at: None,
    },
    Fixture {
        query: "q5",
        model: model(Family::Log, -7.6e3, 5.7e5, -1.2e6),
        requested_rate: 2.5e6,
        published: [None, None, Some(1069), Some(1079)],
        tolerance: Tolerance::Relative(0.10),
        exact_at: None,
    },
    Fixture {
        query: "q8",
        model: model(Family::Sqrt, 2.6e3, 1.4e6, -3.9e6),
        requested_rate: 15e6,
        published: [None, None, Some(179), Some(176)],
        tolerance: Tolerance::Informational,
        exact_at: None,
    },
    Fixture {
        query: "q11",
        model: model(Family::Linear, 4.1, 3.9e4, -2.1e5),
        requested_rate: 20e6,
        published: [Some(565), Some(564), Some(562), Some(559)],
        tolerance: Tolerance::Relative(0.02),
        exact_at: None,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRow {
    pub query: &'static str,
    pub memory_mb: u32,
    pub planned: Option<u32>,
    pub published: u32,
    /// Slots planned without over-provisioning.
    pub planned_bare: Option<u32>,
    pub tolerance: Tolerance,
    /// `None` for informational rows.
    pub pass: Option<bool>,
}

impl ReplayRow {
    pub fn deviation(&self) -> Option<f64> {
        self.planned
            .map(|p| (f64::from(p) - f64::from(self.published)) / f64::from(self.published))
    }
}

pub fn replay(fixture: &Fixture) -> Vec<ReplayRow> {
    PROFILES_MB
        .iter()
        .zip(fixture.published)
        .filter_map(|(&mem, published)| published.map(|p| (mem, p)))
        .map(|(mem, published)| {
            let m = f64::from(mem);
            let planned = fixture
                .model
                .invert(m, fixture.requested_rate, DEFAULT_OVERPROVISION, DEFAULT_SLOTS_CAP)
                .ok();
            let planned_bare = fixture
                .model
                .invert(m, fixture.requested_rate, 1.0, DEFAULT_SLOTS_CAP)
                .ok();
            let tolerance = if fixture.exact_at == Some(mem) {
                Tolerance::Slots(0)
            } else {
                fixture.tolerance
            };
            let pass = match planned {
                Some(p) => tolerance.accepts(p, published),
                None => match tolerance {
                    Tolerance::Informational => None,
                    _ => Some(false),
                },
            };
            ReplayRow {
                query: fixture.query,
                memory_mb: mem,
                planned,
                published,
                planned_bare,
                tolerance,
                pass,
            }
        })
        .collect()
}

pub fn replay_all() -> Vec<ReplayRow> {
    FIXTURES.iter().flat_map(replay).collect()
}

/// Text report, one line per row, and whether every judged row passed.
pub fn render(rows: &[ReplayRow]) -> (String, bool) {
    let mut out = String::new();
    out.push_str("query  memory_mb  planned  published  deviation  tolerance   verdict\n");
    let mut ok = true;
    for r in rows {
        let planned = r.planned.map_or("-".to_string(), |p| p.to_string());
        let dev = r
            .deviation()
            .map_or("-".to_string(), |d| format!("{:+.2}%", d * 100.0));
        let verdict = match r.pass {
            Some(true) => "pass".to_string(),
            Some(false) => {
                ok = false;
                "FAIL".to_string()
            }
            None => format!(
                "info (without over-provisioning: {})",
                r.planned_bare.map_or("-".to_string(), |p| p.to_string())
            ),
        };
        out.push_str(&format!(
            "{:<5}  {:>9}  {:>7}  {:>9}  {:>9}  {:<10}  {}\n",
            r.query,
            r.memory_mb,
            planned,
            r.published,
            dev,
            r.tolerance.to_string(),
            verdict
        ));
    }
    (out, ok)
}
