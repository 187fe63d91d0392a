//! Lifted form of the unified iteration as a composition of four operators,
//! with sampled checks of the contraction properties of each factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::algorithm::{contraction_factor, weight_ratio, WeightTriple};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SymSpectrum};
use crate::problem::CompositeProblem;

/// Default number of random pairs per check.
pub const DEFAULT_TRIALS: usize = 100;

/// Tolerance on every sampled inequality and identity, relative to
/// `1 + magnitude`.
pub const VERIFY_TOL: f64 = 1e-9;

/// Stacked state `[z̃; √C ỹ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub upper: Mat,
    pub lower: Mat,
}

impl LiftedState {
    pub fn new(upper: Mat, lower: Mat) -> Result<Self> {
        if upper.shape() != lower.shape() {
            return Err(Error::Dimension {
                expected: format!("lower block {}x{}", upper.nrows(), upper.ncols()),
                got: format!("{}x{}", lower.nrows(), lower.ncols()),
            });
        }
        Ok(LiftedState { upper, lower })
    }

    pub fn stacked(&self) -> Mat {
        let (m, d) = self.upper.shape();
        let mut out = Mat::zeros(2 * m, d);
        out.rows_mut(0, m).copy_from(&self.upper);
        out.rows_mut(m, m).copy_from(&self.lower);
        out
    }

    pub fn from_stacked(u: &Mat) -> Self {
        let m = u.nrows() / 2;
        LiftedState {
            upper: u.rows(0, m).into_owned(),
            lower: u.rows(m, m).into_owned(),
        }
    }

    pub fn sub(&self, other: &LiftedState) -> LiftedState {
        LiftedState {
            upper: &self.upper - &other.upper,
            lower: &self.lower - &other.lower,
        }
    }
}

/// Block-diagonal weight `diag(M_u, M_ℓ)` defining `‖X‖²_M = ⟨MX, X⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNorm {
    pub upper: Mat,
    pub lower: Mat,
}

impl WeightedNorm {
    /// `diag(I − C, I)`.
    pub fn lambda_c(t: &WeightTriple) -> Self {
        let id = Mat::identity(t.m(), t.m());
        WeightedNorm {
            upper: &id - t.c(),
            lower: id,
        }
    }

    /// `diag(I, I − C)`.
    pub fn v_c(t: &WeightTriple) -> Self {
        let id = Mat::identity(t.m(), t.m());
        WeightedNorm {
            lower: &id - t.c(),
            upper: id,
        }
    }

    /// `diag(q²I, I)`.
    pub fn q_f(m: usize, q: f64) -> Self {
        let id = Mat::identity(m, m);
        WeightedNorm {
            upper: &id * (q * q),
            lower: id,
        }
    }

    /// `diag(B², I)`.
    pub fn lambda_b(t: &WeightTriple) -> Self {
        WeightedNorm {
            upper: t.b() * t.b(),
            lower: Mat::identity(t.m(), t.m()),
        }
    }

    pub fn identity(m: usize) -> Self {
        WeightedNorm {
            upper: Mat::identity(m, m),
            lower: Mat::identity(m, m),
        }
    }

    pub fn norm_sq(&self, x: &LiftedState) -> f64 {
        linalg::weighted_norm_sq(&self.upper, &x.upper) + linalg::weighted_norm_sq(&self.lower, &x.lower)
    }

    /// The full `2m×2m` matrix.
    pub fn matrix(&self) -> Mat {
        let m = self.upper.nrows();
        let mut out = Mat::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(&self.upper);
        out.view_mut((m, m), (m, m)).copy_from(&self.lower);
        out
    }
}

/// `(D − γ∇f)(x)`.
fn gradient_map(t: &WeightTriple, p: &CompositeProblem, gamma: f64, x: &Mat) -> Mat {
    t.d() * x - p.gradient_stack_unchecked(x) * gamma
}

/// Lifted start matching the original iteration run from `x⁰` with `y⁰ = 0`:
/// `z̃¹ = (D − γ∇f)(x⁰)` and lower block `√C z̃¹`.
pub fn lift(t: &WeightTriple, p: &CompositeProblem, gamma: f64, x0: &Mat) -> Result<LiftedState> {
    if x0.shape() != (p.m(), p.d()) || t.m() != p.m() {
        return Err(Error::Dimension {
            expected: format!("{}x{}", t.m(), p.d()),
            got: format!("{}x{}", x0.nrows(), x0.ncols()),
        });
    }
    let upper = gradient_map(t, p, gamma, x0);
    let lower = t.sqrt_c() * &upper;
    Ok(LiftedState { upper, lower })
}

/// Maps a lifted state back to `(z, y) = (B z̃, B√C w̃)`.
pub fn reconstruct(t: &WeightTriple, u: &LiftedState) -> (Mat, Mat) {
    (t.b() * &u.upper, t.b() * t.sqrt_c() * &u.lower)
}

pub fn t_b(t: &WeightTriple, u: &LiftedState) -> LiftedState {
    LiftedState {
        upper: t.b() * &u.upper,
        lower: u.lower.clone(),
    }
}

pub fn t_g(p: &CompositeProblem, gamma: f64, u: &LiftedState) -> LiftedState {
    LiftedState {
        upper: p.prox_unchecked(gamma, &u.upper),
        lower: u.lower.clone(),
    }
}

pub fn t_f(t: &WeightTriple, p: &CompositeProblem, gamma: f64, u: &LiftedState) -> LiftedState {
    LiftedState {
        upper: gradient_map(t, p, gamma, &u.upper),
        lower: u.lower.clone(),
    }
}

/// `[[I, −√C], [√C, I − C]]`.
pub fn t_c(t: &WeightTriple, u: &LiftedState) -> LiftedState {
    let s = t.sqrt_c();
    LiftedState {
        upper: &u.upper - s * &u.lower,
        lower: s * &u.upper + &u.lower - t.c() * &u.lower,
    }
}

/// `T = T_C ∘ T_f ∘ T_g ∘ T_B`.
pub fn apply_t(t: &WeightTriple, p: &CompositeProblem, gamma: f64, u: &LiftedState) -> LiftedState {
    t_c(t, &t_f(t, p, gamma, &t_g(p, gamma, &t_b(t, u))))
}

/// The lifted recursion written out in one block expression.
pub fn apply_t_monolithic(t: &WeightTriple, p: &CompositeProblem, gamma: f64, u: &LiftedState) -> LiftedState {
    let m = t.m();
    let v = gradient_map(t, p, gamma, &p.prox_unchecked(gamma, &(t.b() * &u.upper)));
    LiftedState {
        upper: &v - t.sqrt_c() * &u.lower,
        lower: t.sqrt_c() * &v + (Mat::identity(m, m) - t.c()) * &u.lower,
    }
}

/// Outcome of one sampled check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    /// Largest relative excess over the claimed bound (0 when never exceeded).
    pub max_violation: f64,
    /// Largest observed ratio for inequality checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    pub trials: usize,
    pub pass: bool,
}

impl CheckReport {
    fn new(check: &str, max_violation: f64, max_ratio: Option<f64>, trials: usize) -> Self {
        CheckReport {
            check: check.into(),
            max_violation,
            max_ratio,
            trials,
            pass: max_violation <= VERIFY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifierReport {
    pub preset: String,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

struct Sampler {
    rng: ChaCha8Rng,
    m: usize,
    d: usize,
}

impl Sampler {
    fn new(m: usize, d: usize, seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            m,
            d,
        }
    }

    fn block(&mut self) -> Mat {
        let rng = &mut self.rng;
        Mat::from_fn(self.m, self.d, |_, _| StandardNormal.sample(rng))
    }

    fn state(&mut self) -> LiftedState {
        LiftedState {
            upper: self.block(),
            lower: self.block(),
        }
    }

    /// State whose lower block lies in `range(√C)`.
    fn feasible_state(&mut self, t: &WeightTriple) -> LiftedState {
        let mut s = self.state();
        s.lower = t.consensus().range_projector() * &s.lower;
        s
    }
}

fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (1.0 + rhs.abs())
}

fn excess(lhs: f64, bound: f64) -> f64 {
    ((lhs - bound) / (1.0 + bound.abs())).max(0.0)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `‖T_C X − T_C Y‖²_{Λ_C} = ‖X − Y‖²_{V_C}` on random pairs.
pub fn verify_consensus_isometry(t: &WeightTriple, d: usize, trials: usize, seed: u64) -> CheckReport {
    let mut sampler = Sampler::new(t.m(), d, seed);
    let (lam, v) = (WeightedNorm::lambda_c(t), WeightedNorm::v_c(t));
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (x, y) = (sampler.state(), sampler.state());
        let lhs = lam.norm_sq(&t_c(t, &x).sub(&t_c(t, &y)));
        let rhs = v.norm_sq(&x.sub(&y));
        worst = worst.max(relative_gap(lhs, rhs));
    }
    CheckReport::new("consensus_isometry", worst, None, trials)
}

/// Largest value of `‖(T_f X)_u − (T_f Y)_u‖² / ‖(X)_u − (Y)_u‖²` over all
/// differences, attained along the returned direction. Exact for quadratic
/// costs, where the map on differences is linear.
pub fn gradient_extremal_ratio(t: &WeightTriple, p: &CompositeProblem, gamma: f64) -> (f64, Mat) {
    let (m, d) = (p.m(), p.d());
    // Row-major vectorization: index i*d + a.
    let mut k = Mat::zeros(m * d, m * d);
    for i in 0..m {
        for j in 0..m {
            for a in 0..d {
                k[(i * d + a, j * d + a)] += t.d()[(i, j)];
            }
        }
        let q = p.costs()[i].q();
        for a in 0..d {
            for b in 0..d {
                k[(i * d + a, i * d + b)] -= gamma * q[(a, b)];
            }
        }
    }
    let spec = SymSpectrum::of(&k);
    let (lo, hi) = (spec.min(), spec.max());
    let col = if lo.abs() > hi.abs() { 0 } else { m * d - 1 };
    let v = spec.vectors.column(col);
    let dir = Mat::from_fn(m, d, |i, a| v[i * d + a]);
    (lo.abs().max(hi.abs()).powi(2), dir)
}

/// `‖(T_f X)_u − (T_f Y)_u‖² ≤ q²‖(X)_u − (Y)_u‖²` with the lower block
/// left untouched.
pub fn verify_gradient_contraction(t: &WeightTriple, p: &CompositeProblem, gamma: f64, trials: usize, seed: u64) -> CheckReport {
    let d_spec = SymSpectrum::of(t.d());
    let q = contraction_factor(d_spec.min(), linalg::snap(d_spec.max(), 1.0), p.mu(), p.l(), gamma);
    let mut sampler = Sampler::new(t.m(), p.d(), seed);
    let mut worst: f64 = 0.0;
    let mut top: f64 = 0.0;
    for _ in 0..trials {
        let (x, y) = (sampler.state(), sampler.state());
        let (fx, fy) = (t_f(t, p, gamma, &x), t_f(t, p, gamma, &y));
        let num = (&fx.upper - &fy.upper).norm_squared();
        let den = (&x.upper - &y.upper).norm_squared();
        top = top.max(ratio(num, den));
        worst = worst.max(excess(num, q * q * den));
        if fx.lower != x.lower {
            worst = f64::INFINITY;
        }
    }
    CheckReport::new("gradient_contraction", worst, Some(top), trials)
}

/// Nonexpansiveness of the proximal step on the upper block.
pub fn verify_prox_nonexpansive(p: &CompositeProblem, gamma: f64, trials: usize, seed: u64) -> CheckReport {
    let mut sampler = Sampler::new(p.m(), p.d(), seed);
    let mut worst: f64 = 0.0;
    let mut top: f64 = 0.0;
    for _ in 0..trials {
        let (x, y) = (sampler.state(), sampler.state());
        let (gx, gy) = (t_g(p, gamma, &x), t_g(p, gamma, &y));
        let num = (&gx.upper - &gy.upper).norm_squared();
        let den = (&x.upper - &y.upper).norm_squared();
        top = top.max(ratio(num, den));
        worst = worst.max(excess(num, den));
        if gx.lower != x.lower {
            worst = f64::INFINITY;
        }
    }
    CheckReport::new("prox_nonexpansive", worst, Some(top), trials)
}

/// `‖(T_B X)_u‖² = ‖(X)_u‖²_{B²}`.
pub fn verify_mixing_isometry(t: &WeightTriple, d: usize, trials: usize, seed: u64) -> CheckReport {
    let mut sampler = Sampler::new(t.m(), d, seed);
    let b2 = t.b() * t.b();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = sampler.state();
        let bx = t_b(t, &x);
        let lhs = bx.upper.norm_squared();
        let rhs = linalg::weighted_norm_sq(&b2, &x.upper);
        worst = worst.max(relative_gap(lhs, rhs));
        if bx.lower != x.lower {
            worst = f64::INFINITY;
        }
    }
    CheckReport::new("mixing_isometry", worst, None, trials)
}

/// Direction attaining `‖Z‖²_{B²} = λ_max(B²(I−C)⁻¹)‖Z‖²_{I−C}`.
pub fn weight_ratio_direction(t: &WeightTriple) -> linalg::Vector {
    let m = t.m();
    let spec = SymSpectrum::of(&(Mat::identity(m, m) - t.c()));
    let inv_sqrt = spec.map(|v| 1.0 / v.sqrt());
    let inner = SymSpectrum::of(&(&inv_sqrt * t.b() * t.b() * &inv_sqrt));
    &inv_sqrt * inner.vectors.column(m - 1)
}

/// `‖Z‖²_{B²} ≤ λ_max(B²(I−C)⁻¹)‖Z‖²_{I−C}` on random blocks.
pub fn verify_weight_ratio(t: &WeightTriple, d: usize, trials: usize, seed: u64) -> CheckReport {
    let mut sampler = Sampler::new(t.m(), d, seed);
    let beta = weight_ratio(t);
    let b2 = t.b() * t.b();
    let i_minus_c = Mat::identity(t.m(), t.m()) - t.c();
    let mut worst: f64 = 0.0;
    let mut top: f64 = 0.0;
    for _ in 0..trials {
        let z = sampler.block();
        let num = linalg::weighted_norm_sq(&b2, &z);
        let den = linalg::weighted_norm_sq(&i_minus_c, &z);
        top = top.max(ratio(num, den));
        worst = worst.max(excess(num, beta * den));
    }
    CheckReport::new("weight_ratio", worst, Some(top), trials)
}

/// `‖TX − TY‖²_{Λ_C} ≤ λ‖X − Y‖²_{Λ_C}` on the given pairs.
pub fn verify_chain_pairs(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    lambda: f64,
    pairs: &[(LiftedState, LiftedState)],
) -> CheckReport {
    let norm = WeightedNorm::lambda_c(t);
    let mut worst: f64 = 0.0;
    let mut top: f64 = 0.0;
    for (x, y) in pairs {
        let lhs = norm.norm_sq(&apply_t(t, p, gamma, x).sub(&apply_t(t, p, gamma, y)));
        let rhs = norm.norm_sq(&x.sub(y));
        top = top.max(ratio(lhs, rhs));
        worst = worst.max(excess(lhs, lambda * rhs));
    }
    CheckReport::new("chain_contraction", worst, Some(top), pairs.len())
}

/// `steps` consecutive pairs along an orbit of `T`. After each step the gap
/// is rescaled to its initial length, so it turns toward the slowest
/// contracting direction.
pub fn orbit_pairs(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    start: (LiftedState, LiftedState),
    steps: usize,
) -> Vec<(LiftedState, LiftedState)> {
    let (mut x, mut y) = start;
    let size = x.sub(&y).stacked().norm();
    let mut pairs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (tx, ty) = (apply_t(t, p, gamma, &x), apply_t(t, p, gamma, &y));
        pairs.push((x, y));
        let gap = ty.sub(&tx);
        let len = gap.stacked().norm();
        if !(len > 0.0) {
            break;
        }
        let scale = size / len;
        y = LiftedState {
            upper: &tx.upper + &gap.upper * scale,
            lower: t.consensus().range_projector() * (&tx.lower + &gap.lower * scale),
        };
        x = tx;
    }
    pairs
}

/// Chain check on `trials` random pairs with lower blocks in `range(√C)`,
/// followed by `trials` pairs along an orbit started from a random pair.
pub fn verify_chain(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> CheckReport {
    let mut sampler = Sampler::new(t.m(), p.d(), seed);
    let mut pairs: Vec<_> = (0..trials)
        .map(|_| (sampler.feasible_state(t), sampler.feasible_state(t)))
        .collect();
    let start = (sampler.feasible_state(t), sampler.feasible_state(t));
    pairs.extend(orbit_pairs(t, p, gamma, start, trials));
    verify_chain_pairs(t, p, gamma, lambda, &pairs)
}

/// Runs every check for one triple and problem.
pub fn verify_all(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> VerifierReport {
    let d = p.d();
    let checks = vec![
        verify_consensus_isometry(t, d, trials, seed),
        verify_gradient_contraction(t, p, gamma, trials, seed.wrapping_add(1)),
        verify_prox_nonexpansive(p, gamma, trials, seed.wrapping_add(2)),
        verify_mixing_isometry(t, d, trials, seed.wrapping_add(3)),
        verify_weight_ratio(t, d, trials, seed.wrapping_add(4)),
        verify_chain(t, p, gamma, lambda, trials, seed.wrapping_add(5)),
    ];
    let pass = checks.iter().all(|l| l.pass);
    VerifierReport {
        preset: t.label().to_string(),
        checks,
        pass,
    }
}
