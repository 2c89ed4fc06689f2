//! Bisects for the maximum sustainable throughput of one configuration and
//! prints every probe.

use capplan::estimator::estimate_mst_traced;
use capplan::scenario::Scenario;
use capplan::sim::true_mst;
use capplan::{Configuration, ResourceProfile};

fn main() -> capplan::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/q11.toml");
    let s = Scenario::load(path.as_ref())?;
    let config = Configuration::from_values(s.spec.graph(), &[1, 1, 8])?;
    let profile = ResourceProfile::new(2048)?;

    let (result, trace) = estimate_mst_traced(&s.spec, &config, profile, &s.ce_params, 1)?;
    for (i, (m, ok)) in trace.probes.iter().zip(&trace.successes).enumerate() {
        let verdict = if *ok { "sustained" } else { "backpressure" };
        println!("probe {i:>2}  {:>12.0} evt/s  ratio {:.3}  {verdict}", m.rate, m.achieved_ratio);
    }
    println!(
        "estimate {:.0} evt/s after {} iterations, oracle {:.0}",
        result.mst,
        result.iterations_used,
        true_mst(&s.spec, &config, profile)?
    );
    Ok(())
}
