//! Centralized proximal gradient on the averaged problem.

use crate::algorithm::{TrajectoryRow, DIVERGENCE_BOUND};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problem::{interval_distance, CompositeProblem};
use crate::tradeoff;

#[derive(Debug, Clone)]
pub struct CentralizedRun {
    /// `x⁰, x¹, …, x^iters`.
    pub iterates: Vec<Vector>,
    pub gamma: f64,
    /// `(κ−1)/(κ+1)`.
    pub rho_opt: f64,
}

/// `x^{k+1} = prox_{γG}(x^k − γ∇F(x^k))`.
pub fn prox_grad_run(p: &CompositeProblem, gamma: f64, iters: usize, x0: &Vector) -> Result<CentralizedRun> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {gamma} must be positive")));
    }
    if x0.len() != p.d() {
        return Err(Error::Dimension {
            expected: format!("length {}", p.d()),
            got: format!("length {}", x0.len()),
        });
    }
    let mut iterates = Vec::with_capacity(iters + 1);
    iterates.push(x0.clone());
    for k in 1..=iters {
        let next = p.prox_gradient_step(gamma, &iterates[k - 1]);
        if let Some(&value) = next.iter().find(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Diverged { iter: k, iterate: "x", value });
        }
        iterates.push(next);
    }
    Ok(CentralizedRun {
        iterates,
        gamma,
        rho_opt: tradeoff::rho_opt(p.kappa())?,
    })
}

impl CentralizedRun {
    /// `‖x^k − x⋆‖²` for `k = 1..=iters`.
    pub fn err_sq(&self, x_star: &Vector) -> Vec<f64> {
        self.iterates[1..].iter().map(|x| (x - x_star).norm_squared()).collect()
    }

    /// Rows in the distributed trajectory schema. Consensus and primal
    /// residuals are zero; the dual column holds `dist(−∇F(x), ∂G(x))`.
    pub fn rows(&self, p: &CompositeProblem, x_star: &Vector) -> Vec<TrajectoryRow> {
        let f_star = p.objective(x_star);
        self.iterates[1..]
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let grad = p.average_gradient(x);
                let dual = (0..p.d())
                    .map(|j| interval_distance(-grad[j], p.nonsmooth().subdifferential(j, x[j])).powi(2))
                    .sum::<f64>()
                    .sqrt();
                TrajectoryRow {
                    iter: k + 1,
                    err_sq: (x - x_star).norm_squared(),
                    consensus: 0.0,
                    obj_gap: p.objective(x) - f_star,
                    kkt_primal: 0.0,
                    kkt_dual: dual,
                }
            })
            .collect()
    }
}
