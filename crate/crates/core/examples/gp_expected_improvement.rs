//! Fits a Gaussian process to a few costs on the unit square and ranks a
//! coarse grid by Expected Improvement.

use capplan::gp::{expected_improvement, fit, suggest, HyperGrid};

fn main() -> capplan::Result<()> {
    let cost = |x: [f64; 2]| (x[0] - 0.7).powi(2) + 0.5 * (x[1] - 0.3).powi(2);
    let seen = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
    let points: Vec<_> = seen.iter().map(|&x| (x, cost(x))).collect();
    let gp = fit(&points, &HyperGrid::default())?;
    println!(
        "length scales {:?}, noise {:.0e}, log marginal likelihood {:.3}",
        gp.length_scales(),
        gp.noise_variance(),
        gp.log_marginal_likelihood()
    );

    let best = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut grid = Vec::new();
    for i in 0..=4u32 {
        for j in 0..=4u32 {
            let x = [f64::from(i) / 4.0, f64::from(j) / 4.0];
            grid.push(((i, j), x));
        }
    }
    for j in (0..=4u32).rev() {
        let row: Vec<String> = (0..=4u32)
            .map(|i| format!("{:.4}", expected_improvement(&gp, [f64::from(i) / 4.0, f64::from(j) / 4.0], best)))
            .collect();
        println!("{}", row.join("  "));
    }
    let (i, j) = suggest(&gp, &grid, best).expect("grid is not empty");
    println!("next point ({}, {})", f64::from(i) / 4.0, f64::from(j) / 4.0);
    Ok(())
}
