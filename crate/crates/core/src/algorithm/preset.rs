//! Weight choices that recover known distributed algorithms.

use serde::{Deserialize, Serialize};

use super::triple::WeightTriple;
use crate::error::{Error, Result};
use crate::graph::GossipMatrix;
use crate::linalg::{self, Mat, STRICT_TOL};

/// Named parameterization of `(A, B, C, D)` in terms of a gossip matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// `A = (I+W)/2, B = I, C = (I−W)/2`.
    Extra,
    /// NIDS / Exact Diffusion: `A = B = (I+W)/2, C = (I−W)/2`.
    #[serde(rename = "nids_exact_diffusion", alias = "nids")]
    Nids,
    /// NEXT / AugDGM: `A = B = W², C = (I−W)²`.
    #[serde(rename = "next_augdgm")]
    NextAugdgm,
    /// `A = W², B = I, C = (I−W)²`.
    Diging,
    /// `A = bW² + (1−b)W, B = I, C = bW² − (1+b)W + I`.
    Jakovetic { b: f64 },
    /// `A = W^K, B = Σ_{i=1}^{K−1} W^i, C = W − W^K`.
    Mansoori { k: usize },
    /// `A = W, B = I, C = α(I−W)`.
    Alghunaim { alpha: f64 },
    /// `A = B = W, C = I − W`; needs `W ≻ 0`.
    Case1,
    /// `A = B = W, C = I − W²`.
    Case2,
    /// `A = B = P_K(W), C = I − P_K(W)²` with Chebyshev `P_K`.
    Chebyshev { k: usize },
}

impl Preset {
    /// Every row of the table with its default parameters.
    pub fn table() -> Vec<Preset> {
        vec![
            Preset::Extra,
            Preset::Nids,
            Preset::NextAugdgm,
            Preset::Diging,
            Preset::Jakovetic { b: 0.5 },
            Preset::Mansoori { k: 2 },
            Preset::Alghunaim { alpha: 0.5 },
            Preset::Case1,
            Preset::Case2,
            Preset::Chebyshev { k: 2 },
        ]
    }

    pub fn label(&self) -> String {
        match self {
            Preset::Extra => "extra".into(),
            Preset::Nids => "nids_exact_diffusion".into(),
            Preset::NextAugdgm => "next_augdgm".into(),
            Preset::Diging => "diging".into(),
            Preset::Jakovetic { b } => format!("jakovetic(b={b})"),
            Preset::Mansoori { k } => format!("mansoori(K={k})"),
            Preset::Alghunaim { alpha } => format!("alghunaim(alpha={alpha})"),
            Preset::Case1 => "case1".into(),
            Preset::Case2 => "case2".into(),
            Preset::Chebyshev { k } => format!("chebyshev(K={k})"),
        }
    }

    fn reject(&self, reason: impl Into<String>) -> Error {
        Error::Preset {
            preset: self.label(),
            reason: reason.into(),
        }
    }

    pub fn build(&self, gossip: &GossipMatrix) -> Result<WeightTriple> {
        let w = gossip.entries();
        let m = w.nrows();
        let id = Mat::identity(m, m);
        let w2 = w * w;
        let (a, b, c, d) = match *self {
            Preset::Extra => {
                let a = (&id + w) * 0.5;
                (a.clone(), id.clone(), (&id - w) * 0.5, a)
            }
            Preset::Nids => {
                let a = (&id + w) * 0.5;
                (a.clone(), a, (&id - w) * 0.5, id)
            }
            Preset::NextAugdgm => {
                let diff = &id - w;
                (w2.clone(), w2, &diff * &diff, id)
            }
            Preset::Diging => {
                let diff = &id - w;
                (w2.clone(), id, &diff * &diff, w2)
            }
            Preset::Jakovetic { b } => {
                let a = &w2 * b + w * (1.0 - b);
                let c = &w2 * b - w * (1.0 + b) + &id;
                (a.clone(), id, c, a)
            }
            Preset::Mansoori { k } => {
                if k == 0 {
                    return Err(self.reject("K must be at least 1"));
                }
                let a = linalg::matrix_power(w, k);
                let mut b = Mat::zeros(m, m);
                let mut power = id.clone();
                for _ in 1..k {
                    power = &power * w;
                    b += &power;
                }
                let smallest = linalg::eigenvalues(&b)
                    .into_iter()
                    .map(f64::abs)
                    .fold(f64::INFINITY, f64::min);
                if smallest <= STRICT_TOL {
                    return Err(self.reject("B = Σ W^i is singular, D = B⁻¹A undefined"));
                }
                let d = b
                    .clone()
                    .lu()
                    .solve(&a)
                    .ok_or_else(|| self.reject("B = Σ W^i is singular"))?;
                let c = w - &a;
                (a, b, c, linalg::symmetrize(&d))
            }
            Preset::Alghunaim { alpha } => (w.clone(), id.clone(), (&id - w) * alpha, w.clone()),
            Preset::Case1 => {
                if linalg::lambda_min(w) <= STRICT_TOL {
                    return Err(self.reject("W must be positive definite"));
                }
                (w.clone(), w.clone(), &id - w, id)
            }
            Preset::Case2 => (w.clone(), w.clone(), &id - &w2, id),
            Preset::Chebyshev { k } => {
                let p = gossip.chebyshev(k)?.entries().clone();
                let c = &id - &p * &p;
                (p.clone(), p, c, id)
            }
        };
        WeightTriple::new(a, b, c, d, self.label())
    }
}
