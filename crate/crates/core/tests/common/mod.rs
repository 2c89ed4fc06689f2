#![allow(dead_code)]

use std::path::PathBuf;

use capplan::scenario::{Scenario, ScenarioFile};
use capplan::sim::ScalingLaw;
use capplan::{Family, OperatorGroundTruth};
use rand::Rng;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Every shipped scenario, by file stem.
pub fn shipped_scenarios() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn scenario_file(name: &str) -> ScenarioFile {
    let text = std::fs::read_to_string(scenario_dir().join(format!("{name}.toml"))).unwrap();
    toml::from_str(&text).unwrap()
}

pub fn family_scenario_name(f: Family) -> &'static str {
    match f {
        Family::Linear => "family_linear",
        Family::Log => "family_log",
        Family::Sqrt => "family_sqrt",
    }
}

/// The shipped single-operator scenario of `family` with coefficients drawn
/// around its defaults and the injectable cap set 25% above the largest
/// capacity of the search space.
pub fn random_family_scenario<R: Rng>(family: Family, noise: f64, rng: &mut R) -> Scenario {
    let mut file = scenario_file(family_scenario_name(family));
    let gt: &mut OperatorGroundTruth = file.ground_truth.get_mut("work").unwrap();
    gt.noise_level = noise;
    match family {
        Family::Linear => gt.base_rate = rng.random_range(1.5e4..4.0e4),
        Family::Sqrt => gt.base_rate = rng.random_range(1.2e5..3.0e5),
        Family::Log => {
            gt.base_rate = rng.random_range(0.7e5..1.3e5);
            gt.scaling_law = ScalingLaw::Logarithmic {
                gain: rng.random_range(4.5..7.0),
                pivot: rng.random_range(4.0..7.0),
            };
        }
    }
    let top = file.search_space.pi_max;
    let probe = Scenario::from_file(file.clone()).unwrap();
    let graph = probe.spec.graph();
    let config = capplan::Configuration::from_values(graph, &vec![top; graph.len()]).unwrap();
    let profile = capplan::ResourceProfile::new(*file.search_space.memory_mb.last().unwrap()).unwrap();
    let uncapped = uncapped(&probe);
    let peak = capplan::sim::true_mst(&uncapped.spec, &config, profile).unwrap();
    file.testbed.max_injectable_rate = 1.25 * peak;
    Scenario::from_file(file).unwrap()
}

/// Same scenario with an injectable cap too high to ever bind.
pub fn uncapped(s: &Scenario) -> Scenario {
    let mut out = s.clone();
    out.spec = capplan::GroundTruthSpec::new(
        s.spec.graph().clone(),
        s.spec.operators().map(|(k, v)| (k.clone(), v.clone())).collect(),
        f64::MAX,
        s.spec.warmup_time_constant_s,
        s.spec.tick_seconds,
    )
    .unwrap();
    out
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}
