//! Fits the three surrogate families to measurements, scores them and
//! inverts the selected one.

use capplan::model::{best_model, extrapolation_scores, fit_family, loocv_rmse, select_model};
use capplan::{Family, Observation};

fn main() -> capplan::Result<()> {
    // Capacity growing with the square root of the slot count, 1% jitter.
    let mut d = Vec::new();
    for (k, slots) in [9u32, 12, 16, 20, 26, 32, 40, 48].into_iter().enumerate() {
        for mem in [2048u32, 4096] {
            let wobble = 1.0 + 0.01 * ((k as f64 * 1.7 + f64::from(mem) / 1024.0).sin());
            let mst = (1.4e6 * f64::from(slots).sqrt() + 2.6e3 * f64::from(mem).sqrt() - 3.9e6) * wobble;
            d.push(Observation::new(mem, slots, mst));
        }
    }
    for family in Family::ALL {
        let m = fit_family(&d, family)?;
        println!("{family:<6} a={:>10.3e} b={:>10.3e} c={:>10.3e}  LOOCV {:.3e}", m.a, m.b, m.c, loocv_rmse(&d, family));
    }
    println!("lowest LOOCV: {:?}", best_model(&d));
    println!("extrapolation scores: {:?}", extrapolation_scores(&d)?);

    let model = select_model(&d)?;
    for rate in [5e6, 1e7, 1.5e7] {
        let slots = model.invert(2048.0, rate, 1.10, 10_000)?;
        println!("{rate:.1e} evt/s needs {slots} slots of 2 GB");
    }
    Ok(())
}
