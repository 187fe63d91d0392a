//! The unified iterate under three presets against the algorithms' own
//! recursions, coded directly from their defining updates.

mod common;

use common::*;
use unified_prox::algorithm::{step, AlgorithmState};
use unified_prox::linalg::Mat;
use unified_prox::{CompositeProblem, NonsmoothTerm, Preset};

const ITERS: usize = 100;
const TOL: f64 = 1e-10;

fn grad(p: &CompositeProblem, x: &Mat) -> Mat {
    p.gradient_stack(x).unwrap()
}

fn unified_iterates(preset: Preset, w: &unified_prox::GossipMatrix, p: &CompositeProblem, gamma: f64, x0: &Mat) -> Vec<Mat> {
    let t = preset.build(w).unwrap();
    let zero = Mat::zeros(x0.nrows(), x0.ncols());
    let mut s = AlgorithmState::initial(&t, p, gamma, x0.clone(), zero).unwrap();
    let mut out = vec![s.x.clone()];
    for _ in 0..ITERS {
        s = step(&t, p, gamma, &s).unwrap();
        out.push(s.x.clone());
    }
    out
}

fn max_gap(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

fn setup() -> (unified_prox::GossipMatrix, CompositeProblem, Mat) {
    let w = lazy_ring(8);
    let p = problem(8, 3, 21, 10.0, NonsmoothTerm::Zero);
    let x0 = consensual_start(8, 3);
    (w, p, x0)
}

#[test]
fn extra_matches_two_step_recursion() {
    let (w, p, x0) = setup();
    let gamma = 1.0 / p.l();
    let wm = w.entries();
    let id = Mat::identity(8, 8);
    let w_tilde = (&id + wm) * 0.5;
    let mut xs = vec![x0.clone(), wm * &x0 - grad(&p, &x0) * gamma];
    for k in 0..ITERS - 1 {
        let (prev, cur) = (&xs[k], &xs[k + 1]);
        let next = (&id + wm) * cur - &w_tilde * prev - (grad(&p, cur) - grad(&p, prev)) * gamma;
        xs.push(next);
    }
    let unified = unified_iterates(Preset::Extra, &w, &p, gamma, &x0);
    assert!(max_gap(&xs, &unified) <= TOL, "gap {}", max_gap(&xs, &unified));
}

#[test]
fn exact_diffusion_matches_adapt_correct_combine() {
    let (w, p, x0) = setup();
    let gamma = 2.0 / (p.mu() + p.l());
    let w_tilde = (Mat::identity(8, 8) + w.entries()) * 0.5;
    let mut x = x0.clone();
    let mut psi = x0.clone();
    let mut xs = vec![x.clone()];
    for _ in 0..ITERS {
        let psi_next = &x - grad(&p, &x) * gamma;
        let phi = &psi_next + &x - &psi;
        x = &w_tilde * phi;
        psi = psi_next;
        xs.push(x.clone());
    }
    let unified = unified_iterates(Preset::Nids, &w, &p, gamma, &x0);
    assert!(max_gap(&xs, &unified) <= TOL, "gap {}", max_gap(&xs, &unified));
}

#[test]
fn diging_matches_gradient_tracking() {
    let (w, p, x0) = setup();
    let gamma = 1.0 / p.l();
    let wm = w.entries();
    let mut x = x0.clone();
    let mut s = grad(&p, &x);
    let mut xs = vec![x.clone()];
    for _ in 0..ITERS {
        let x_next = wm * &x - &s * gamma;
        s = wm * &s + grad(&p, &x_next) - grad(&p, &x);
        x = x_next;
        xs.push(x.clone());
    }
    let unified = unified_iterates(Preset::Diging, &w, &p, gamma, &x0);
    assert!(max_gap(&xs, &unified) <= TOL, "gap {}", max_gap(&xs, &unified));
}
