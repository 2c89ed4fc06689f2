//! Explores a query's resource space, then plans a rate far beyond what was
//! measured. Pass a scenario path to use another query.

use capplan::explorer::{explore, plan};
use capplan::scenario::{measurements_csv, plan_table, Scenario};
use capplan::ResourceProfile;

fn main() -> capplan::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/q11.toml").to_string());
    let s = Scenario::load(path.as_ref())?;
    let report = explore(&s.spec, &s.search_space, &s.explorer_params, &s.ce_params, s.seed)?;
    print!("{}", measurements_csv(&report));
    println!(
        "{} measurements, {} optimizer and {} estimator calls, {:.1} simulated hours, stop {:?}",
        report.points.len(),
        report.co_calls,
        report.ce_calls,
        report.simulated_s / 3600.0,
        report.stop_reason
    );

    let settings = s.plan.as_ref();
    let rate = settings.map_or(1e7, |p| p.requested_rate);
    let cap = settings.map_or(capplan::model::DEFAULT_SLOTS_CAP, |p| p.slots_cap);
    let profiles = s
        .search_space
        .memory_mb
        .iter()
        .filter(|&&m| report.points.iter().any(|p| p.memory_mb == m))
        .map(|&m| ResourceProfile::new(m))
        .collect::<capplan::Result<Vec<_>>>()?;
    print!("{}", plan_table(&plan(&report, rate, &profiles, cap)?));
    Ok(())
}
