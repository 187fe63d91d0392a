use serde::Serialize;

use super::triple::WeightTriple;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SymSpectrum};

/// Step-size window and contraction factors predicted for a weight triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePrediction {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_star: f64,
    /// Step size the remaining fields were evaluated at.
    pub gamma: f64,
    pub q: f64,
    pub lambda: f64,
    /// `1 − λ₂(C)`.
    pub lambda_comm: f64,
    /// `q² λ_max(B²(I−C)⁻¹)`.
    pub lambda_opt: f64,
    /// `λ_max(B²(I−C)⁻¹)`.
    pub beta: f64,
    pub d_min: f64,
    pub d_max: f64,
}

/// `λ_max(B²(I−C)⁻¹)`, evaluated through the similar symmetric matrix
/// `(I−C)^{-1/2} B² (I−C)^{-1/2}`.
pub fn weight_ratio(t: &WeightTriple) -> f64 {
    let m = t.m();
    let i_minus_c = Mat::identity(m, m) - t.c();
    let inv_sqrt = SymSpectrum::of(&i_minus_c).map(|v| 1.0 / v.sqrt());
    let b2 = t.b() * t.b();
    linalg::lambda_max(&(&inv_sqrt * b2 * &inv_sqrt))
}

/// Contraction factor `max(|λ_min(D) − γL|, |λ_max(D) − γμ|)`.
pub fn contraction_factor(d_min: f64, d_max: f64, mu: f64, l: f64, gamma: f64) -> f64 {
    (d_min - gamma * l).abs().max((d_max - gamma * mu).abs())
}

/// Predicted linear rate for `t` on a problem with constants `(mu, l)`.
/// Without an explicit `gamma` the optimal step size is used.
pub fn rate_prediction(t: &WeightTriple, mu: f64, l: f64, gamma: Option<f64>) -> Result<RatePrediction> {
    let report = t.validate(mu, l);
    if !report.all_passed() {
        return Err(Error::InvalidTriple(report.summary()));
    }
    let d_spec = SymSpectrum::of(t.d());
    let d_min = d_spec.min();
    let d_max = linalg::snap(d_spec.max(), 1.0);
    let beta = weight_ratio(t);
    let slack = beta.powf(-0.5);
    let gamma_lo = (d_max - slack).max(0.0) / mu;
    let gamma_hi = (d_min + slack) / l;
    let gamma_star = (d_max + d_min) / (l + mu);
    let gamma = gamma.unwrap_or(gamma_star);
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {gamma} must be positive")));
    }
    let q = contraction_factor(d_min, d_max, mu, l, gamma);
    let c_values = linalg::eigenvalues(t.c());
    let lambda_comm = 1.0 - c_values[1];
    let lambda_opt = q * q * beta;
    Ok(RatePrediction {
        gamma_lo,
        gamma_hi,
        gamma_star,
        gamma,
        q,
        lambda: lambda_opt.max(lambda_comm),
        lambda_comm,
        lambda_opt,
        beta,
        d_min,
        d_max,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algorithm::Preset;
    use crate::graph::{GossipMatrix, Graph};

    #[test]
    fn unit_weight_ratio_regime_matches_closed_form() {
        let w = GossipMatrix::metropolis(Arc::new(Graph::ring(10).unwrap()));
        let t = Preset::Nids.build(&w).unwrap();
        let (mu, l) = (1.0, 10.0);
        let r = rate_prediction(&t, mu, l, None).unwrap();
        let kappa = l / mu;
        let q = (kappa - 1.0) / (kappa + 1.0);
        assert!((r.gamma_star - 2.0 / (l + mu)).abs() < 1e-12);
        assert!((r.q - q).abs() < 1e-12);
        assert!((r.beta - 1.0).abs() < 1e-10);
        let lambda2 = linalg::eigenvalues(t.c())[1];
        assert!((r.lambda - (q * q).max(1.0 - lambda2)).abs() < 1e-10);
        assert!(r.gamma_lo < r.gamma_star && r.gamma_star < r.gamma_hi);
    }

    #[test]
    fn perfect_conditioning_leaves_only_communication() {
        let w = GossipMatrix::metropolis(Arc::new(Graph::ring(5).unwrap()));
        let t = Preset::Case2.build(&w).unwrap();
        let r = rate_prediction(&t, 3.0, 3.0, None).unwrap();
        assert!(r.q.abs() < 1e-12);
        assert!((r.lambda - r.lambda_comm).abs() < 1e-15);
    }

    #[test]
    fn diging_on_lazy_path() {
        // Lazy path-3 weights have eigenvalues {1, 5/6, 1/2}.
        let w = GossipMatrix::metropolis(Arc::new(Graph::path(3).unwrap())).lazy();
        let t = Preset::Diging.build(&w).unwrap();
        let r = rate_prediction(&t, 1.0, 2.0, None).unwrap();
        let s3 = 3f64.sqrt();
        assert!((r.gamma_lo - (1.0 - s3 / 2.0)).abs() < 1e-10, "{r:?}");
        assert!((r.gamma_hi - (0.25 + s3 / 2.0) / 2.0).abs() < 1e-10);
        assert!((r.gamma_star - 1.25 / 3.0).abs() < 1e-12);
        assert!((r.q - 7.0 / 12.0).abs() < 1e-10);
        assert!((r.lambda - 35.0 / 36.0).abs() < 1e-10);
    }

    #[test]
    fn diging_with_metropolis_path_is_rejected() {
        let w = GossipMatrix::metropolis(Arc::new(Graph::path(3).unwrap()));
        let t = Preset::Diging.build(&w).unwrap();
        assert!(matches!(rate_prediction(&t, 1.0, 10.0, None), Err(Error::InvalidTriple(_))));
    }

    #[test]
    fn explicit_step_size_is_used() {
        let w = GossipMatrix::metropolis(Arc::new(Graph::path(3).unwrap())).lazy();
        let t = Preset::Extra.build(&w).unwrap();
        let star = rate_prediction(&t, 1.0, 10.0, None).unwrap();
        let other = rate_prediction(&t, 1.0, 10.0, Some(0.5 * star.gamma_star)).unwrap();
        assert_eq!(other.gamma, 0.5 * star.gamma_star);
        assert!(other.q >= star.q);
    }
}
