//! Drives a two-operator pipeline below, at and above its capacity and
//! prints what the metrics show: achieved ratio, busyness, backlog.

use capplan::sim::{deploy, true_mst};
use capplan::{Configuration, GroundTruthSpec, JobGraph, OperatorGroundTruth, ResourceProfile};

fn main() -> capplan::Result<()> {
    let graph = JobGraph::pipeline(&["parse", "aggregate"])?;
    let truths = [
        ("parse".into(), OperatorGroundTruth::linear(4000.0)),
        (
            "aggregate".into(),
            OperatorGroundTruth {
                noise_level: 0.01,
                ..OperatorGroundTruth::linear(1000.0)
            },
        ),
    ]
    .into_iter()
    .collect();
    let spec = GroundTruthSpec::new(graph, truths, 1e5, 20.0, 5.0)?;
    let config = Configuration::from_values(spec.graph(), &[1, 3])?;
    let profile = ResourceProfile::new(1024)?;
    let mst = true_mst(&spec, &config, profile)?;
    println!("true capacity {mst:.0} evt/s");

    for load in [0.5, 0.95, 1.2] {
        let mut d = deploy(&spec, &config, profile, 42)?;
        d.advance(120.0);
        d.set_target_rate(load * mst);
        d.advance(90.0);
        let w = d.sample_metrics(3)?;
        print!("load {:>4.0}%  achieved {:.3}  backlog {:>8.0}", load * 100.0, w.achieved_ratio, w.pending_records);
        for (op, u) in &w.metrics.per_operator {
            print!("  {op} busy {:.2}", u.busyness);
        }
        println!();
    }
    Ok(())
}
