use super::triple::WeightTriple;
use crate::certify;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::problem::CompositeProblem;

/// Entries larger than this in magnitude abort a run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Iterates `(x^k, z^k, y^k)` with `x^k = prox_{γg}(z^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState {
    pub x: Mat,
    pub z: Mat,
    pub y: Mat,
    pub k: usize,
}

fn check_stack(p: &CompositeProblem, name: &str, m: &Mat) -> Result<()> {
    if m.shape() != (p.m(), p.d()) {
        return Err(Error::Dimension {
            expected: format!("{name} of shape {}x{}", p.m(), p.d()),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

fn check_setup(t: &WeightTriple, p: &CompositeProblem, gamma: f64) -> Result<()> {
    if t.m() < 2 || p.m() < 2 {
        return Err(Error::SingleAgent);
    }
    if t.m() != p.m() {
        return Err(Error::Dimension {
            expected: format!("{} agents", t.m()),
            got: format!("{} agents", p.m()),
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {gamma} must be positive")));
    }
    Ok(())
}

fn guard(iter: usize, iterate: &'static str, m: &Mat) -> Result<()> {
    match m.iter().find(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
        Some(&value) => Err(Error::Diverged { iter, iterate, value }),
        None => Ok(()),
    }
}

impl AlgorithmState {
    /// Starts from `z⁰`, `y⁰`; `y⁰` must lie in `range(C)`.
    pub fn initial(t: &WeightTriple, p: &CompositeProblem, gamma: f64, z0: Mat, y0: Mat) -> Result<Self> {
        check_setup(t, p, gamma)?;
        check_stack(p, "z0", &z0)?;
        check_stack(p, "y0", &y0)?;
        let outside = (&y0 - t.consensus().range_projector() * &y0).norm();
        if outside > 1e-10 * y0.norm().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "initial dual lies {outside:e} away from range(C)"
            )));
        }
        let x = p.prox_unchecked(gamma, &z0);
        Ok(AlgorithmState { x, z: z0, y: y0, k: 0 })
    }

    /// `z⁰ = 0`, `y⁰ = 0`.
    pub fn zeros(t: &WeightTriple, p: &CompositeProblem, gamma: f64) -> Result<Self> {
        let zero = Mat::zeros(p.m(), p.d());
        Self::initial(t, p, gamma, zero.clone(), zero)
    }

    /// The fixed point associated with the solution `x_star`:
    /// `z⋆ = 1(x⋆ − γ∇F(x⋆))ᵀ` and `y⋆ = A X⋆ − γB∇f(X⋆) − Z⋆`.
    pub fn fixed_point(t: &WeightTriple, p: &CompositeProblem, gamma: f64, x_star: &Vector) -> Result<Self> {
        check_setup(t, p, gamma)?;
        let m = p.m();
        let x = linalg::consensus_matrix(m, x_star);
        let z_row = x_star - p.average_gradient(x_star) * gamma;
        let z = linalg::consensus_matrix(m, &z_row);
        let y = t.a() * &x - t.b() * p.gradient_stack_unchecked(&x) * gamma - &z;
        Ok(AlgorithmState { x, z, y, k: 0 })
    }

    /// `max_j |1ᵀ y_j|`.
    pub fn dual_drift(&self) -> f64 {
        linalg::column_sums(&self.y).amax()
    }
}

/// One pass of the primal-dual update.
pub fn step(t: &WeightTriple, p: &CompositeProblem, gamma: f64, s: &AlgorithmState) -> Result<AlgorithmState> {
    check_setup(t, p, gamma)?;
    check_stack(p, "x", &s.x)?;
    let k = s.k + 1;
    let grad = p.gradient_stack_unchecked(&s.x);
    let z = t.a() * &s.x - t.b() * grad * gamma - &s.y;
    guard(k, "z", &z)?;
    let y = &s.y + t.c() * &z;
    guard(k, "y", &y)?;
    let x = p.prox_unchecked(gamma, &z);
    guard(k, "x", &x)?;
    Ok(AlgorithmState { x, z, y, k })
}

fn consistency(p: &CompositeProblem, gamma: f64, name: &str, z: &Mat, x: &Mat) -> Result<()> {
    let dev = (p.prox_unchecked(gamma, z) - x).amax();
    if dev > 1e-12 * (1.0 + x.amax()) {
        return Err(Error::InconsistentHistory(format!(
            "{name} differs from prox of its z by {dev:e}"
        )));
    }
    Ok(())
}

/// Two-term recursion in `z` alone:
/// `z⁺ = (I−C)z + A(x − x⁻) − γB(∇f(x) − ∇f(x⁻))` with `x = prox(z)`.
/// Returns `(z⁺, x⁺)`.
pub fn step_eliminated(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    z_prev: &Mat,
    z_curr: &Mat,
    x_prev: &Mat,
    x_curr: &Mat,
) -> Result<(Mat, Mat)> {
    check_setup(t, p, gamma)?;
    for (name, m) in [("z_prev", z_prev), ("z_curr", z_curr), ("x_prev", x_prev), ("x_curr", x_curr)] {
        check_stack(p, name, m)?;
    }
    consistency(p, gamma, "x_prev", z_prev, x_prev)?;
    consistency(p, gamma, "x_curr", z_curr, x_curr)?;
    let m = p.m();
    let grad_diff = p.gradient_stack_unchecked(x_curr) - p.gradient_stack_unchecked(x_prev);
    let z_next = (Mat::identity(m, m) - t.c()) * z_curr + t.a() * (x_curr - x_prev) - t.b() * grad_diff * gamma;
    guard(0, "z", &z_next)?;
    let x_next = p.prox_unchecked(gamma, &z_next);
    Ok((z_next, x_next))
}

/// Recursion in `x` alone, valid without a nonsmooth term:
/// `x⁺ = (I−C+A)x − Ax⁻ − γB(∇f(x) − ∇f(x⁻))`.
pub fn step_smooth_eliminated(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    x_prev: &Mat,
    x_curr: &Mat,
) -> Result<Mat> {
    check_setup(t, p, gamma)?;
    if !p.nonsmooth().is_zero() {
        return Err(Error::InvalidParameter(
            "the x-only recursion requires a zero nonsmooth term".into(),
        ));
    }
    check_stack(p, "x_prev", x_prev)?;
    check_stack(p, "x_curr", x_curr)?;
    let m = p.m();
    let grad_diff = p.gradient_stack_unchecked(x_curr) - p.gradient_stack_unchecked(x_prev);
    let next = (Mat::identity(m, m) - t.c() + t.a()) * x_curr - t.a() * x_prev - t.b() * grad_diff * gamma;
    guard(0, "x", &next)?;
    Ok(next)
}

/// Metrics recorded after each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    /// `‖x^k − 1x⋆ᵀ‖²`.
    pub err_sq: f64,
    /// `‖x^k − 1x̄ᵀ‖`.
    pub consensus: f64,
    /// Objective at the average row minus the optimal value.
    pub obj_gap: f64,
    pub kkt_primal: f64,
    pub kkt_dual: f64,
}

pub const TRAJECTORY_HEADER: &str = "iter,err_sq,consensus,obj_gap,kkt_primal,kkt_dual";

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub final_state: AlgorithmState,
    /// Largest `|1ᵀ y_j|` seen over the run.
    pub max_dual_drift: f64,
}

impl Trajectory {
    pub fn err_sq(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.err_sq).collect()
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }
}

pub fn rows_to_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter, r.err_sq, r.consensus, r.obj_gap, r.kkt_primal, r.kkt_dual
        ));
    }
    out
}

/// Records the metrics of `x` against the solution `x_star`.
pub fn measure(
    t: &WeightTriple,
    p: &CompositeProblem,
    x: &Mat,
    x_star: &Vector,
    f_star: f64,
    iter: usize,
) -> Result<TrajectoryRow> {
    let m = p.m();
    let err_sq = (x - linalg::consensus_matrix(m, x_star)).norm_squared();
    let mean = linalg::row_mean(x);
    let consensus = (x - linalg::consensus_matrix(m, &mean)).norm();
    let obj_gap = p.objective(&mean) - f_star;
    let kkt = certify::kkt_residual_recovered(p, t.consensus(), x)?;
    Ok(TrajectoryRow {
        iter,
        err_sq,
        consensus,
        obj_gap,
        kkt_primal: kkt.primal,
        kkt_dual: kkt.dual,
    })
}

/// Runs `iters` steps from `start`, recording a row after each.
pub fn run(
    t: &WeightTriple,
    p: &CompositeProblem,
    gamma: f64,
    iters: usize,
    start: AlgorithmState,
    x_star: &Vector,
) -> Result<Trajectory> {
    check_setup(t, p, gamma)?;
    if x_star.len() != p.d() {
        return Err(Error::Dimension {
            expected: format!("solution of length {}", p.d()),
            got: format!("length {}", x_star.len()),
        });
    }
    let f_star = p.objective(x_star);
    let mut state = start;
    let mut rows = Vec::with_capacity(iters);
    let mut max_dual_drift = state.dual_drift();
    for _ in 0..iters {
        state = step(t, p, gamma, &state)?;
        max_dual_drift = max_dual_drift.max(state.dual_drift());
        rows.push(measure(t, p, &state.x, x_star, f_star, state.k)?);
    }
    Ok(Trajectory {
        rows,
        final_state: state,
        max_dual_drift,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algorithm::Preset;
    use crate::graph::{GossipMatrix, Graph};
    use crate::problem::{generate, GeneratorParams, NonsmoothTerm, QuadraticCost};

    fn ring_nids(m: usize) -> WeightTriple {
        let w = GossipMatrix::metropolis(Arc::new(Graph::ring(m).unwrap()));
        Preset::Nids.build(&w).unwrap()
    }

    #[test]
    fn consensus_optimum_is_stationary() {
        let cost = QuadraticCost::new(Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), Vector::from_vec(vec![1.0, -1.0])).unwrap();
        let p = CompositeProblem::new(vec![cost; 4], NonsmoothTerm::Zero).unwrap();
        let t = ring_nids(4);
        let x_star = p.reference_solution(1e-13).unwrap();
        let gamma = 0.3;
        let start = AlgorithmState::fixed_point(&t, &p, gamma, &x_star).unwrap();
        // Identical agents: the dual is zero and z⋆ = 1x⋆ᵀ − γ∇F = 1x⋆ᵀ.
        assert!(start.y.norm() < 1e-12);
        let next = step(&t, &p, gamma, &start).unwrap();
        assert!((&next.z - &start.z).amax() < 1e-12);
        assert!((&next.x - &start.x).amax() < 1e-12);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn one_step_matches_hand_arithmetic() {
        let costs = vec![
            QuadraticCost::new(Mat::from_element(1, 1, 2.0), Vector::from_element(1, 1.0)).unwrap(),
            QuadraticCost::new(Mat::from_element(1, 1, 4.0), Vector::from_element(1, -2.0)).unwrap(),
        ];
        let p = CompositeProblem::new(costs, NonsmoothTerm::Zero).unwrap();
        let eps = 0.1;
        let c = Mat::from_row_slice(2, 2, &[eps, -eps, -eps, eps]);
        let t = WeightTriple::new(Mat::identity(2, 2), Mat::identity(2, 2), c, Mat::identity(2, 2), "custom").unwrap();
        let gamma = 0.25;
        let z0 = Mat::from_column_slice(2, 1, &[1.0, 3.0]);
        let y0 = Mat::from_column_slice(2, 1, &[0.5, -0.5]);
        let s = AlgorithmState::initial(&t, &p, gamma, z0, y0).unwrap();
        let s1 = step(&t, &p, gamma, &s).unwrap();
        // x = z; grad = (2·1 − 1, 4·3 + 2) = (1, 14).
        let z1 = [1.0 - 0.25 * 1.0 - 0.5, 3.0 - 0.25 * 14.0 + 0.5];
        assert!((s1.z[0] - z1[0]).abs() < 1e-15 && (s1.z[1] - z1[1]).abs() < 1e-15);
        let gap = z1[0] - z1[1];
        assert!((s1.y[0] - (0.5 + eps * gap)).abs() < 1e-15);
        assert!((s1.y[1] - (-0.5 - eps * gap)).abs() < 1e-15);
    }

    #[test]
    fn single_agent_is_rejected() {
        let cost = QuadraticCost::new(Mat::from_element(1, 1, 1.0), Vector::from_element(1, 0.0)).unwrap();
        let p = CompositeProblem::new(vec![cost], NonsmoothTerm::Zero).unwrap();
        let one = Mat::identity(1, 1);
        let t = WeightTriple::new(one.clone(), one.clone(), Mat::zeros(1, 1), one, "custom").unwrap();
        assert_eq!(AlgorithmState::zeros(&t, &p, 0.1).unwrap_err(), Error::SingleAgent);
    }

    #[test]
    fn initial_dual_outside_range_is_rejected() {
        let p = generate(3, 2, &GeneratorParams::default(), NonsmoothTerm::Zero).unwrap();
        let t = ring_nids(3);
        let y0 = Mat::from_element(3, 2, 1.0);
        assert!(AlgorithmState::initial(&t, &p, 0.1, Mat::zeros(3, 2), y0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let p = generate(4, 2, &GeneratorParams::default(), NonsmoothTerm::Zero).unwrap();
        let t = ring_nids(4);
        let start = AlgorithmState::initial(&t, &p, 50.0, Mat::from_element(4, 2, 1.0), Mat::zeros(4, 2)).unwrap();
        let x_star = p.reference_solution(1e-12).unwrap();
        match run(&t, &p, 50.0, 10_000, start, &x_star) {
            Err(Error::Diverged { iterate, .. }) => assert_eq!(iterate, "z"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_iterations_give_empty_trajectory() {
        let p = generate(4, 2, &GeneratorParams::default(), NonsmoothTerm::Zero).unwrap();
        let t = ring_nids(4);
        let x_star = p.reference_solution(1e-12).unwrap();
        let traj = run(&t, &p, 0.1, 0, AlgorithmState::zeros(&t, &p, 0.1).unwrap(), &x_star).unwrap();
        assert!(traj.rows.is_empty());
        assert_eq!(traj.to_csv(), format!("{TRAJECTORY_HEADER}\n"));
    }

    #[test]
    fn smooth_recursion_agrees_with_z_recursion() {
        let p = generate(5, 3, &GeneratorParams::default(), NonsmoothTerm::Zero).unwrap();
        let t = ring_nids(5);
        let gamma = 0.2;
        let s0 = AlgorithmState::zeros(&t, &p, gamma).unwrap();
        let s1 = step(&t, &p, gamma, &s0).unwrap();
        let (z2, x2) = step_eliminated(&t, &p, gamma, &s0.z, &s1.z, &s0.x, &s1.x).unwrap();
        let x2_smooth = step_smooth_eliminated(&t, &p, gamma, &s0.x, &s1.x).unwrap();
        assert!((&z2 - &x2).amax() == 0.0);
        assert!((&x2 - &x2_smooth).amax() < 1e-12);
    }

    #[test]
    fn inconsistent_history_is_rejected() {
        let p = generate(3, 1, &GeneratorParams { mu: 1.0, l: 1.0, ..GeneratorParams::default() }, NonsmoothTerm::L1 { weight: 1.0 }).unwrap();
        let t = ring_nids(3);
        let z = Mat::from_element(3, 1, 0.2);
        let wrong_x = z.clone();
        let res = step_eliminated(&t, &p, 1.0, &z, &z, &wrong_x, &wrong_x);
        assert!(matches!(res, Err(Error::InconsistentHistory(_))));
    }
}
