//! Optimality residuals and empirical decay rates.

use serde::Serialize;

use crate::algorithm::{ConsensusOperator, RatePrediction, WeightTriple};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::problem::{interval_distance, CompositeProblem};

/// Errors at or below this value are treated as numerically zero.
pub const ERROR_FLOOR: f64 = 1e-24;

/// Residuals of the saddle-point optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    /// `‖√C x‖`.
    pub primal: f64,
    /// Distance from `−(∇f(x) + √C y)` to `∂g(x)`.
    pub dual: f64,
    pub y_used: Mat,
    /// Set when the supplied `y` had a component outside `range(C)`.
    pub projected: bool,
}

fn check_shapes(p: &CompositeProblem, x: &Mat) -> Result<()> {
    if x.shape() != (p.m(), p.d()) {
        return Err(Error::Dimension {
            expected: format!("{}x{}", p.m(), p.d()),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    Ok(())
}

/// Row `i`, column `j` subdifferential of `g` at `x`.
fn subgradient_set(p: &CompositeProblem, x: &Mat, i: usize, j: usize) -> Option<(f64, f64)> {
    p.nonsmooth().subdifferential(j, x[(i, j)])
}

pub fn kkt_residual(p: &CompositeProblem, consensus: &ConsensusOperator, x: &Mat, y: &Mat) -> Result<KktResidual> {
    check_shapes(p, x)?;
    check_shapes(p, y)?;
    if consensus.m() != p.m() {
        return Err(Error::Dimension {
            expected: format!("consensus matrix of order {}", p.m()),
            got: format!("order {}", consensus.m()),
        });
    }
    let y_used = consensus.range_projector() * y;
    let projected = (&y_used - y).norm() > 1e-10 * y.norm();
    let primal = (consensus.sqrt_c() * x).norm();
    let v = -(p.gradient_stack_unchecked(x) + consensus.sqrt_c() * &y_used);
    let mut dual_sq = 0.0;
    for i in 0..p.m() {
        for j in 0..p.d() {
            dual_sq += interval_distance(v[(i, j)], subgradient_set(p, x, i, j)).powi(2);
        }
    }
    Ok(KktResidual {
        primal,
        dual: dual_sq.sqrt(),
        y_used,
        projected,
    })
}

/// Least-squares dual certificate for `x` restricted to `range(√C)`.
///
/// Per column, a subgradient selection is chosen whose sum cancels the
/// summed gradients as closely as the subdifferential allows; what remains
/// after centering lies in `range(√C)` and is mapped back through `√C⁺`.
pub fn recover_dual(p: &CompositeProblem, consensus: &ConsensusOperator, x: &Mat) -> Result<Mat> {
    check_shapes(p, x)?;
    let (m, d) = (p.m(), p.d());
    let grad = p.gradient_stack_unchecked(x);
    let mut residual = grad.clone();
    for j in 0..d {
        let sets: Vec<(f64, f64)> = (0..m)
            .map(|i| subgradient_set(p, x, i, j).unwrap_or((0.0, 0.0)))
            .collect();
        let lo: f64 = sets.iter().map(|s| s.0).sum();
        let hi: f64 = sets.iter().map(|s| s.1).sum();
        let target = (-grad.column(j).sum()).clamp(lo, hi);
        let mut pick: Vec<f64> = sets.iter().map(|&(a, b)| 0f64.clamp(a, b)).collect();
        let mut deficit = target - pick.iter().sum::<f64>();
        for (s, &(a, b)) in pick.iter_mut().zip(&sets) {
            if deficit == 0.0 {
                break;
            }
            let moved = (*s + deficit).clamp(a, b);
            deficit -= moved - *s;
            *s = moved;
        }
        for i in 0..m {
            residual[(i, j)] += pick[i];
        }
    }
    let mean = linalg::row_mean(&residual);
    let centered = -(residual - linalg::consensus_matrix(m, &mean));
    Ok(consensus.sqrt_c_pinv() * centered)
}

/// KKT residual with the dual certificate recovered from `x` alone.
pub fn kkt_residual_recovered(p: &CompositeProblem, consensus: &ConsensusOperator, x: &Mat) -> Result<KktResidual> {
    let y = recover_dual(p, consensus, x)?;
    kkt_residual(p, consensus, x, &y)
}

/// Distance of `x` from the fixed-point set of the unified iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixResidual {
    /// `‖Cx‖`.
    pub consensus: f64,
    /// Distance of `1ᵀ(I−A)x + γ1ᵀB∇f(x)` from `−γ1ᵀ∂g(x)`.
    pub aggregate: f64,
}

pub fn fix_residual(t: &WeightTriple, p: &CompositeProblem, gamma: f64, x: &Mat) -> Result<FixResidual> {
    check_shapes(p, x)?;
    let m = p.m();
    let consensus = (t.c() * x).norm();
    let drift = (Mat::identity(m, m) - t.a()) * x + t.b() * p.gradient_stack_unchecked(x) * gamma;
    let mut agg_sq = 0.0;
    for j in 0..p.d() {
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut feasible = true;
        for i in 0..m {
            match subgradient_set(p, x, i, j) {
                Some((a, b)) => {
                    lo += a;
                    hi += b;
                }
                None => feasible = false,
            }
        }
        let set = feasible.then_some((gamma * lo, gamma * hi));
        agg_sq += interval_distance(-drift.column(j).sum(), set).powi(2);
    }
    Ok(FixResidual {
        consensus,
        aggregate: agg_sq.sqrt(),
    })
}

/// Least-squares fit of `log err_k` against `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    /// `exp(slope)`.
    pub lambda: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    /// `exp(slope ∓ 2·stderr)`.
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Half-open index range used for the fit.
    pub window: (usize, usize),
    /// The error reached [`ERROR_FLOOR`] and the window was moved earlier.
    pub truncated: bool,
    /// Fewer than 20 points in the window.
    pub short_window: bool,
    /// The upper confidence bound on the slope is negative.
    pub contractive: bool,
}

/// Fits the decay rate over the last half of `errors`, or over the half
/// before the first entry at the numerical floor if one is reached.
pub fn empirical_rate(errors: &[f64]) -> Result<RateEstimate> {
    let n = errors.len();
    let floor = errors.iter().position(|&e| !(e > ERROR_FLOOR));
    let (window, truncated) = match floor {
        Some(f) => ((f / 2, f), true),
        None => ((n / 2, n), false),
    };
    let len = window.1 - window.0;
    if len < 2 {
        return Err(Error::InsufficientData(format!(
            "{len} usable points in a trajectory of length {n}"
        )));
    }
    let ks: Vec<f64> = (window.0..window.1).map(|k| k as f64).collect();
    let logs: Vec<f64> = errors[window.0..window.1].iter().map(|e| e.ln()).collect();
    let nf = len as f64;
    let k_mean = ks.iter().sum::<f64>() / nf;
    let l_mean = logs.iter().sum::<f64>() / nf;
    let sxx: f64 = ks.iter().map(|k| (k - k_mean).powi(2)).sum();
    let sxy: f64 = ks.iter().zip(&logs).map(|(k, l)| (k - k_mean) * (l - l_mean)).sum();
    let slope = sxy / sxx;
    let intercept = l_mean - slope * k_mean;
    let slope_stderr = if len > 2 {
        let ssr: f64 = ks
            .iter()
            .zip(&logs)
            .map(|(k, l)| (l - intercept - slope * k).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateEstimate {
        lambda: slope.exp(),
        slope,
        slope_stderr,
        lambda_lo: (slope - 2.0 * slope_stderr).exp(),
        lambda_hi: (slope + 2.0 * slope_stderr).exp(),
        window,
        truncated,
        short_window: len < 20,
        contractive: slope + 2.0 * slope_stderr < 0.0,
    })
}

/// Slack allowed between the fitted and the predicted rate.
pub const RATE_SLACK: f64 = 0.02;

/// Verdict on one run: the fitted rate must not exceed the prediction by
/// more than [`RATE_SLACK`] and the run must be contracting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub preset: String,
    pub gamma: f64,
    pub lambda_pred: f64,
    pub lambda_emp: f64,
    pub kkt_primal: f64,
    pub kkt_dual: f64,
    pub pass: bool,
}

impl CertificationReport {
    /// With `kkt_tol`, both final residuals must also be below it.
    pub fn assess(
        preset: impl Into<String>,
        prediction: &RatePrediction,
        estimate: &RateEstimate,
        kkt: &KktResidual,
        kkt_tol: Option<f64>,
    ) -> Self {
        let rate_ok = estimate.lambda <= prediction.lambda + RATE_SLACK && estimate.contractive;
        let kkt_ok = kkt_tol.is_none_or(|tol| kkt.primal <= tol && kkt.dual <= tol);
        CertificationReport {
            preset: preset.into(),
            gamma: prediction.gamma,
            lambda_pred: prediction.lambda,
            lambda_emp: estimate.lambda,
            kkt_primal: kkt.primal,
            kkt_dual: kkt.dual,
            pass: rate_ok && kkt_ok,
        }
    }
}
