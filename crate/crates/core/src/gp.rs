//! Gaussian-process surrogate over the normalized (memory, slots) square,
//! with Expected Improvement for minimization.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Hyperparameter grid searched by maximum marginal likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub length_scales: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            length_scales: vec![0.1, 0.2, 0.3, 0.5, 1.0],
            noise_variances: vec![1e-6, 1e-4, 1e-2, 1e-1],
        }
    }
}

const JITTERS: [f64; 5] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7];
const MAX_JITTER: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GpPosterior {
    inputs: Vec<[f64; 2]>,
    length_scales: [f64; 2],
    noise_variance: f64,
    jitter: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    mean: f64,
    scale: f64,
    log_marginal_likelihood: f64,
}

fn se_kernel(a: [f64; 2], b: [f64; 2], ls: [f64; 2]) -> f64 {
    let d0 = (a[0] - b[0]) / ls[0];
    let d1 = (a[1] - b[1]) / ls[1];
    (-0.5 * (d0 * d0 + d1 * d1)).exp()
}

/// Kernel matrix plus `noise` on the diagonal.
pub fn kernel_matrix(inputs: &[[f64; 2]], ls: [f64; 2], noise: f64) -> DMatrix<f64> {
    let n = inputs.len();
    DMatrix::from_fn(n, n, |i, j| {
        se_kernel(inputs[i], inputs[j], ls) + if i == j { noise } else { 0.0 }
    })
}

fn factorize(k: &DMatrix<f64>) -> Option<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    let n = k.nrows();
    JITTERS
        .iter()
        .chain(std::iter::once(&MAX_JITTER))
        .find_map(|&j| {
            let m = k + DMatrix::identity(n, n) * j;
            Cholesky::new(m).map(|c| (c, j))
        })
}

/// Fits a GP to `points = ((m_norm, p_norm), cost)`.
pub fn fit(points: &[([f64; 2], f64)], grid: &HyperGrid) -> Result<GpPosterior> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "a GP needs at least two points".into(),
        ));
    }
    if points
        .iter()
        .any(|(x, y)| !y.is_finite() || x.iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::InvalidParameter(
            "GP inputs must lie in [0,1]² with finite targets".into(),
        ));
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let inputs: Vec<[f64; 2]> = points.iter().map(|p| p.0).collect();
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| (p.1 - mean) / scale));

    let mut best: Option<GpPosterior> = None;
    for &lm in &grid.length_scales {
        for &lp in &grid.length_scales {
            for &noise in &grid.noise_variances {
                let ls = [lm, lp];
                let k = kernel_matrix(&inputs, ls, noise);
                let Some((chol, jitter)) = factorize(&k) else {
                    continue;
                };
                let alpha = chol.solve(&y);
                let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
                let lml = -0.5 * y.dot(&alpha)
                    - 0.5 * log_det
                    - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
                // Strictly greater keeps the first grid point on ties.
                if best
                    .as_ref()
                    .is_none_or(|b| lml > b.log_marginal_likelihood)
                {
                    best = Some(GpPosterior {
                        inputs: inputs.clone(),
                        length_scales: ls,
                        noise_variance: noise,
                        jitter,
                        chol,
                        alpha,
                        mean,
                        scale,
                        log_marginal_likelihood: lml,
                    });
                }
            }
        }
    }
    best.ok_or(Error::SingularKernel)
}

impl GpPosterior {
    pub fn length_scales(&self) -> [f64; 2] {
        self.length_scales
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Lower-triangular factor of the regularized kernel matrix.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Predictive mean and variance of the latent function, in target units.
    pub fn posterior_at(&self, x: [f64; 2]) -> (f64, f64) {
        let kx = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|&xi| se_kernel(xi, x, self.length_scales)),
        );
        let mu = kx.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("non-singular factor");
        let mut var = 1.0 - v.dot(&v);
        if var < 0.0 {
            debug_assert!(var > -1e-9, "negative predictive variance {var}");
            var = 0.0;
        }
        (
            self.mean + self.scale * mu,
            self.scale * self.scale * var,
        )
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// EI of a Gaussian prediction `(mean, sd)` below `best`.
pub fn expected_improvement_of(mean: f64, sd: f64, best: f64) -> f64 {
    if !(sd > 0.0) {
        return 0.0;
    }
    let z = (best - mean) / sd;
    ((best - mean) * std_normal_cdf(z) + sd * std_normal_pdf(z)).max(0.0)
}

pub fn expected_improvement(gp: &GpPosterior, x: [f64; 2], best_cost: f64) -> f64 {
    let (mu, var) = gp.posterior_at(x);
    expected_improvement_of(mu, var.sqrt(), best_cost)
}

/// Grid point maximizing EI. Candidates are `(memory_mb, task_slots)` with
/// their normalized coordinates; ties prefer fewer slots, then less memory.
pub fn suggest(gp: &GpPosterior, grid: &[((u32, u32), [f64; 2])], best_cost: f64) -> Option<(u32, u32)> {
    let mut best: Option<((u32, u32), f64)> = None;
    for &(cand, x) in grid {
        let ei = expected_improvement(gp, x, best_cost);
        let better = match best {
            None => true,
            Some(((m, p), b)) => ei > b || (ei == b && (cand.1, cand.0) < (p, m)),
        };
        if better {
            best = Some((cand, ei));
        }
    }
    best.map(|(c, _)| c)
}
