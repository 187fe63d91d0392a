//! Composite problems `min F(x) + G(x)` with `F = (1/m) Σ f_i`.
//!
//! Every local cost is a strongly convex quadratic
//! `f_i(x) = ½ xᵀ Q_i x − b_iᵀ x`, so the constants `μ`, `L` and the
//! solution are known exactly. The shared nonsmooth term `G` has a
//! closed-form proximal map.

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SymSpectrum, Vector};

const MAX_REFERENCE_ITERS: usize = 1_000_000;

/// `f(x) = ½ xᵀ Q x − bᵀ x` with `Q` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    q: Mat,
    b: Vector,
    mu: f64,
    l: f64,
}

impl QuadraticCost {
    pub fn new(q: Mat, b: Vector) -> Result<Self> {
        let d = b.len();
        if q.shape() != (d, d) {
            return Err(Error::Dimension {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        if !linalg::is_symmetric(&q, 1e-12 * (1.0 + q.amax())) {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let spectrum = SymSpectrum::of(&q);
        let (mu, l) = (spectrum.min(), spectrum.max());
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Q must be positive definite (λ_min = {mu})"
            )));
        }
        Ok(QuadraticCost { q, b, mu, l })
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    /// `λ_min(Q)`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `λ_max(Q)`.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.b.dot(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x - &self.b
    }
}

/// Shared nonsmooth term `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonsmoothTerm {
    Zero,
    /// `weight · ‖x‖₁`.
    L1 { weight: f64 },
    /// Indicator of `{x : lower ≤ x ≤ upper}`.
    #[serde(rename = "box")]
    BoxConstraint { lower: Vec<f64>, upper: Vec<f64> },
}

impl NonsmoothTerm {
    fn validate(&self, d: usize) -> Result<()> {
        match self {
            NonsmoothTerm::Zero => Ok(()),
            NonsmoothTerm::L1 { weight } => {
                if *weight >= 0.0 && weight.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("l1 weight must be ≥ 0, got {weight}")))
                }
            }
            NonsmoothTerm::BoxConstraint { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(Error::Dimension {
                        expected: format!("box bounds of length {d}"),
                        got: format!("{} and {}", lower.len(), upper.len()),
                    });
                }
                if lower.iter().zip(upper).any(|(lo, hi)| !(lo <= hi)) {
                    return Err(Error::InvalidParameter("box needs lower ≤ upper".into()));
                }
                Ok(())
            }
        }
    }

    /// `prox_{γG}` applied to coordinate `j` of a row.
    pub fn prox_coord(&self, gamma: f64, j: usize, v: f64) -> f64 {
        match self {
            NonsmoothTerm::Zero => v,
            NonsmoothTerm::L1 { weight } => {
                let t = gamma * weight;
                if v > t {
                    v - t
                } else if v < -t {
                    v + t
                } else {
                    0.0
                }
            }
            NonsmoothTerm::BoxConstraint { lower, upper } => v.clamp(lower[j], upper[j]),
        }
    }

    /// Subdifferential of coordinate `j` of `G` at `x`, as a closed
    /// interval (possibly unbounded). `None` when `x` is outside the domain.
    pub fn subdifferential(&self, j: usize, x: f64) -> Option<(f64, f64)> {
        match self {
            NonsmoothTerm::Zero => Some((0.0, 0.0)),
            NonsmoothTerm::L1 { weight } => Some(if x > 0.0 {
                (*weight, *weight)
            } else if x < 0.0 {
                (-weight, -weight)
            } else {
                (-weight, *weight)
            }),
            NonsmoothTerm::BoxConstraint { lower, upper } => {
                let (lo, hi) = (lower[j], upper[j]);
                if x < lo || x > hi {
                    None
                } else if lo == hi {
                    Some((f64::NEG_INFINITY, f64::INFINITY))
                } else if x == lo {
                    Some((f64::NEG_INFINITY, 0.0))
                } else if x == hi {
                    Some((0.0, f64::INFINITY))
                } else {
                    Some((0.0, 0.0))
                }
            }
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            NonsmoothTerm::Zero => 0.0,
            NonsmoothTerm::L1 { weight } => weight * x.lp_norm(1),
            NonsmoothTerm::BoxConstraint { lower, upper } => {
                let inside = x
                    .iter()
                    .enumerate()
                    .all(|(j, &v)| lower[j] <= v && v <= upper[j]);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonsmoothTerm::Zero)
            || matches!(self, NonsmoothTerm::L1 { weight } if *weight == 0.0)
    }
}

/// Distance from `v` to the interval `[lo, hi]`; infinite for an empty set.
pub fn interval_distance(v: f64, interval: Option<(f64, f64)>) -> f64 {
    match interval {
        None => f64::INFINITY,
        Some((lo, hi)) => (lo - v).max(v - hi).max(0.0),
    }
}

/// Problem (P): `m` local quadratic costs plus a shared nonsmooth term.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeProblem {
    costs: Vec<QuadraticCost>,
    nonsmooth: NonsmoothTerm,
    d: usize,
    mu: f64,
    l: f64,
    q_avg: Mat,
    b_avg: Vector,
}

impl CompositeProblem {
    pub fn new(costs: Vec<QuadraticCost>, nonsmooth: NonsmoothTerm) -> Result<Self> {
        let first = costs
            .first()
            .ok_or_else(|| Error::InvalidParameter("problem needs at least one agent".into()))?;
        let d = first.b.len();
        if let Some(bad) = costs.iter().find(|c| c.b.len() != d) {
            return Err(Error::Dimension {
                expected: format!("dimension {d}"),
                got: format!("dimension {}", bad.b.len()),
            });
        }
        nonsmooth.validate(d)?;
        let m = costs.len() as f64;
        let mu = costs.iter().map(|c| c.mu).fold(f64::INFINITY, f64::min);
        let l = costs.iter().map(|c| c.l).fold(0.0, f64::max);
        let q_avg = costs.iter().fold(Mat::zeros(d, d), |acc, c| acc + &c.q) / m;
        let b_avg = costs.iter().fold(Vector::zeros(d), |acc, c| acc + &c.b) / m;
        Ok(CompositeProblem {
            costs,
            nonsmooth,
            d,
            mu,
            l,
            q_avg,
            b_avg,
        })
    }

    pub fn m(&self) -> usize {
        self.costs.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    pub fn costs(&self) -> &[QuadraticCost] {
        &self.costs
    }

    pub fn nonsmooth(&self) -> &NonsmoothTerm {
        &self.nonsmooth
    }

    /// Hessian of `F`.
    pub fn average_hessian(&self) -> &Mat {
        &self.q_avg
    }

    pub fn with_nonsmooth(&self, nonsmooth: NonsmoothTerm) -> Result<Self> {
        CompositeProblem::new(self.costs.clone(), nonsmooth)
    }

    fn check_stack(&self, x: &Mat) -> Result<()> {
        if x.shape() != (self.m(), self.d) {
            return Err(Error::Dimension {
                expected: format!("{}x{}", self.m(), self.d),
                got: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    /// Stacked local gradients; row `i` is `∇f_i(x_i)`.
    pub fn gradient_stack(&self, x: &Mat) -> Result<Mat> {
        self.check_stack(x)?;
        Ok(self.gradient_stack_unchecked(x))
    }

    pub(crate) fn gradient_stack_unchecked(&self, x: &Mat) -> Mat {
        let mut out = Mat::zeros(x.nrows(), x.ncols());
        for (i, cost) in self.costs.iter().enumerate() {
            let xi = x.row(i).transpose();
            out.set_row(i, &cost.gradient(&xi).transpose());
        }
        out
    }

    /// `prox_{γG}` applied to each row independently.
    pub fn prox_rowwise(&self, gamma: f64, z: &Mat) -> Result<Mat> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {gamma}")));
        }
        if z.ncols() != self.d {
            return Err(Error::Dimension {
                expected: format!("{} columns", self.d),
                got: format!("{} columns", z.ncols()),
            });
        }
        Ok(self.prox_unchecked(gamma, z))
    }

    pub(crate) fn prox_unchecked(&self, gamma: f64, z: &Mat) -> Mat {
        if matches!(self.nonsmooth, NonsmoothTerm::Zero) {
            return z.clone();
        }
        Mat::from_fn(z.nrows(), z.ncols(), |i, j| {
            self.nonsmooth.prox_coord(gamma, j, z[(i, j)])
        })
    }

    pub fn prox_vector(&self, gamma: f64, v: &Vector) -> Vector {
        Vector::from_iterator(
            v.len(),
            v.iter().enumerate().map(|(j, &x)| self.nonsmooth.prox_coord(gamma, j, x)),
        )
    }

    /// `F(x) = (1/m) Σ f_i(x)`.
    pub fn smooth_value(&self, x: &Vector) -> f64 {
        self.costs.iter().map(|c| c.value(x)).sum::<f64>() / self.m() as f64
    }

    /// `∇F(x)`.
    pub fn average_gradient(&self, x: &Vector) -> Vector {
        &self.q_avg * x - &self.b_avg
    }

    /// `F(x) + G(x)`; `+∞` outside the domain of `G`.
    pub fn objective(&self, x: &Vector) -> f64 {
        let g = self.nonsmooth.value(x);
        if g.is_infinite() {
            return g;
        }
        self.smooth_value(x) + g
    }

    /// One centralized proximal-gradient step.
    pub fn prox_gradient_step(&self, gamma: f64, x: &Vector) -> Vector {
        self.prox_vector(gamma, &(x - self.average_gradient(x) * gamma))
    }

    /// `‖x − prox_{γG}(x − γ∇F(x))‖`.
    pub fn fixed_point_residual(&self, gamma: f64, x: &Vector) -> f64 {
        (x - self.prox_gradient_step(gamma, x)).norm()
    }

    /// High-accuracy solution of (P) by centralized proximal gradient with
    /// `γ = 2/(L+μ)`, stopped when `‖x⁺ − x‖ ≤ tol·γ`, then polished by an
    /// exact solve on the identified active set. For `G = 0` the result is
    /// cross-checked against the normal equations `(Σ Q_i) x = Σ b_i`.
    pub fn reference_solution(&self, tol: f64) -> Result<Vector> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let gamma = 2.0 / (self.l + self.mu);
        let mut x = self.prox_vector(gamma, &Vector::zeros(self.d));
        let mut done = false;
        for _ in 0..MAX_REFERENCE_ITERS {
            let next = self.prox_gradient_step(gamma, &x);
            let diff = (&next - &x).norm();
            x = next;
            if diff <= tol * gamma {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::IterationCap {
                cap: MAX_REFERENCE_ITERS,
            });
        }
        if let Some(candidate) = self.polish(&x) {
            if self.fixed_point_residual(gamma, &candidate) <= self.fixed_point_residual(gamma, &x) {
                x = candidate;
            }
        }
        if matches!(self.nonsmooth, NonsmoothTerm::Zero) {
            let closed = self.solve_free(&(0..self.d).collect::<Vec<_>>(), &x)?;
            let deviation = (&closed - &x).norm();
            if deviation > 10.0 * tol {
                return Err(Error::ReferenceMismatch {
                    deviation,
                    tolerance: 10.0 * tol,
                });
            }
        }
        Ok(x)
    }

    /// Exact minimizer of the smooth part restricted to the active set of
    /// `x`: free coordinates are re-solved, fixed ones keep their value.
    fn polish(&self, x: &Vector) -> Option<Vector> {
        match &self.nonsmooth {
            NonsmoothTerm::Zero => self.solve_free(&(0..self.d).collect::<Vec<_>>(), x).ok(),
            NonsmoothTerm::L1 { weight } => {
                let support: Vec<usize> = (0..self.d).filter(|&j| x[j] != 0.0).collect();
                let mut shifted = self.clone();
                for &j in &support {
                    shifted.b_avg[j] -= weight * x[j].signum();
                }
                shifted.solve_free(&support, x).ok()
            }
            NonsmoothTerm::BoxConstraint { lower, upper } => {
                let free: Vec<usize> = (0..self.d)
                    .filter(|&j| x[j] > lower[j] && x[j] < upper[j])
                    .collect();
                self.solve_free(&free, x).ok()
            }
        }
    }

    /// Solves `Q̄_FF x_F = b̄_F − Q̄_{F,rest} x_rest` for the free index set.
    fn solve_free(&self, free: &[usize], x: &Vector) -> Result<Vector> {
        let mut out = x.clone();
        if free.is_empty() {
            return Ok(out);
        }
        let n = free.len();
        let mut sub = Mat::zeros(n, n);
        let mut rhs = Vector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            rhs[a] = self.b_avg[i];
            for j in 0..self.d {
                if !free.contains(&j) {
                    rhs[a] -= self.q_avg[(i, j)] * x[j];
                }
            }
            for (c, &j) in free.iter().enumerate() {
                sub[(a, c)] = self.q_avg[(i, j)];
            }
        }
        let chol = Cholesky::new(sub)
            .ok_or_else(|| Error::InvalidParameter("averaged Hessian is not positive definite".into()))?;
        let sol = chol.solve(&rhs);
        for (a, &i) in free.iter().enumerate() {
            out[i] = sol[a];
        }
        Ok(out)
    }

    pub fn to_document(&self) -> ProblemDocument {
        ProblemDocument {
            m: self.m(),
            d: self.d,
            nonsmooth: self.nonsmooth.clone(),
            source: ProblemSource::Explicit(ExplicitArrays {
                q: self
                    .costs
                    .iter()
                    .map(|c| c.q.row_iter().map(|r| r.iter().copied().collect()).collect())
                    .collect(),
                b: self.costs.iter().map(|c| c.b.iter().copied().collect()).collect(),
            }),
        }
    }
}

/// How local Hessians are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    /// All agents share the eigenvectors of the extreme eigenvalues `μ` and
    /// `L`; the interior spectrum and its eigenbasis vary per agent. The
    /// averaged Hessian then has extreme eigenvalues exactly `μ` and `L`.
    #[default]
    Aligned,
    /// `Q_i = R_iᵀR_i + I` with Gaussian `R_i`, affinely rescaled so each
    /// agent's spectrum spans exactly `[μ, L]`.
    Gaussian,
}

fn default_b_scale() -> f64 {
    1.0
}

/// Seeded random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub seed: u64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default)]
    pub spectrum: Spectrum,
    #[serde(default = "default_b_scale")]
    pub b_scale: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            seed: 0,
            mu: 1.0,
            l: 10.0,
            spectrum: Spectrum::Aligned,
            b_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitArrays {
    /// One `d×d` matrix per agent, row-major.
    pub q: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Generated(GeneratorParams),
    Explicit(ExplicitArrays),
}

/// JSON form of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub m: usize,
    pub d: usize,
    #[serde(default = "zero_term")]
    pub nonsmooth: NonsmoothTerm,
    #[serde(flatten)]
    pub source: ProblemSource,
}

fn zero_term() -> NonsmoothTerm {
    NonsmoothTerm::Zero
}

impl ProblemDocument {
    pub fn build(&self) -> Result<CompositeProblem> {
        match &self.source {
            ProblemSource::Generated(params) => {
                generate(self.m, self.d, params, self.nonsmooth.clone())
            }
            ProblemSource::Explicit(arrays) => {
                if arrays.q.len() != self.m || arrays.b.len() != self.m {
                    return Err(Error::Dimension {
                        expected: format!("{} agents", self.m),
                        got: format!("{} Q and {} b entries", arrays.q.len(), arrays.b.len()),
                    });
                }
                let mut costs = Vec::with_capacity(self.m);
                for (q, b) in arrays.q.iter().zip(&arrays.b) {
                    if q.len() != self.d || q.iter().any(|r| r.len() != self.d) || b.len() != self.d {
                        return Err(Error::Dimension {
                            expected: format!("{0}x{0} Q and length-{0} b", self.d),
                            got: "ragged arrays".into(),
                        });
                    }
                    let qm = Mat::from_fn(self.d, self.d, |r, c| q[r][c]);
                    costs.push(QuadraticCost::new(qm, Vector::from_column_slice(b))?);
                }
                CompositeProblem::new(costs, self.nonsmooth.clone())
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem documents always serialize")
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let qr = gaussian_matrix(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    // Sign fix makes the draw Haar distributed and deterministic.
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Draws a seeded random instance with global constants exactly `(μ, L)`.
pub fn generate(
    m: usize,
    d: usize,
    params: &GeneratorParams,
    nonsmooth: NonsmoothTerm,
) -> Result<CompositeProblem> {
    let (mu, l) = (params.mu, params.l);
    if m == 0 || d == 0 {
        return Err(Error::InvalidParameter("m and d must be positive".into()));
    }
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < μ ≤ L, got μ = {mu}, L = {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let interior = Uniform::new_inclusive(mu, l).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut hessians = Vec::with_capacity(m);
    match params.spectrum {
        Spectrum::Aligned => {
            if d == 1 && mu != l {
                return Err(Error::InvalidParameter(
                    "aligned spectrum with μ < L needs d ≥ 2".into(),
                ));
            }
            let basis = random_orthogonal(&mut rng, d);
            let low = basis.column(0).into_owned();
            let high = basis.column(d - 1).into_owned();
            for _ in 0..m {
                let mut q = &low * low.transpose() * mu;
                if d >= 2 {
                    q += &high * high.transpose() * l;
                }
                if d > 2 {
                    let mid = basis.columns(1, d - 2).into_owned();
                    let rot = random_orthogonal(&mut rng, d - 2);
                    let vals: Vec<f64> = (0..d - 2).map(|_| interior.sample(&mut rng)).collect();
                    let frame = &mid * &rot;
                    let mut scaled = frame.clone();
                    for (k, v) in vals.iter().enumerate() {
                        scaled.column_mut(k).scale_mut(*v);
                    }
                    q += &scaled * frame.transpose();
                }
                hessians.push(linalg::symmetrize(&q));
            }
        }
        Spectrum::Gaussian => {
            for i in 0..m {
                if d == 1 {
                    let v = match i {
                        0 => mu,
                        1 => l,
                        _ => interior.sample(&mut rng),
                    };
                    hessians.push(Mat::from_element(1, 1, v));
                    continue;
                }
                let r = gaussian_matrix(&mut rng, d, d);
                let raw = r.transpose() * &r + Mat::identity(d, d);
                let spec = SymSpectrum::of(&raw);
                let (lo, hi) = (spec.min(), spec.max());
                let q = spec.map(|v| mu + (l - mu) * (v - lo) / (hi - lo));
                hessians.push(linalg::symmetrize(&q));
            }
        }
    }
    let mut costs = Vec::with_capacity(m);
    for q in hessians {
        let b = Vector::from_fn(d, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * params.b_scale
        });
        costs.push(QuadraticCost::new(q, b)?);
    }
    CompositeProblem::new(costs, nonsmooth)
}
