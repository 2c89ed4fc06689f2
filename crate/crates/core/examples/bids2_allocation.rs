//! Splits slot budgets across operators from their per-task rates.

use capplan::optimizer::{bids2, OperatorRate, TrueRates};

fn main() -> capplan::Result<()> {
    let rates = TrueRates(
        [
            ("source_filter", 200.0, 0.5),
            ("enrich", 120.0, 0.5),
            ("window", 80.0, 1.0),
        ]
        .into_iter()
        .map(|(op, o, r)| (op.into(), OperatorRate { o, r }))
        .collect(),
    );
    for budget in [3, 6, 10, 20] {
        let (config, lambda) = bids2(&rates, budget)?;
        let split: Vec<String> = config.iter().map(|(op, p)| format!("{op}={p}")).collect();
        println!("{budget:>3} slots  {:<40} source rate {lambda:.0}", split.join(" "));
    }
    Ok(())
}
