//! The primal-dual iterate against its dual-free recursions.

mod common;

use common::*;
use unified_prox::algorithm::{step, step_eliminated, step_smooth_eliminated, AlgorithmState};
use unified_prox::linalg::Mat;
use unified_prox::{NonsmoothTerm, Preset};

const ITERS: usize = 50;

fn check(g: NonsmoothTerm, preset: Preset, seed: u64) {
    let w = lazy_ring(7);
    let p = problem(7, 4, seed, 10.0, g);
    let t = preset.build(&w).unwrap();
    let gamma = 1.0 / p.l();
    let z0 = Mat::from_fn(7, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 / 3.0 - 1.0);
    let mut s = AlgorithmState::initial(&t, &p, gamma, z0, Mat::zeros(7, 4)).unwrap();
    let mut states = vec![s.clone()];
    for _ in 0..ITERS {
        s = step(&t, &p, gamma, &s).unwrap();
        states.push(s.clone());
    }
    // The z-only recursion, chained on its own output.
    let (mut z_prev, mut z_cur) = (states[0].z.clone(), states[1].z.clone());
    let (mut x_prev, mut x_cur) = (states[0].x.clone(), states[1].x.clone());
    let mut worst: f64 = 0.0;
    for state in &states[2..] {
        let (z_next, x_next) = step_eliminated(&t, &p, gamma, &z_prev, &z_cur, &x_prev, &x_cur).unwrap();
        worst = worst.max((&z_next - &state.z).amax()).max((&x_next - &state.x).amax());
        z_prev = std::mem::replace(&mut z_cur, z_next);
        x_prev = std::mem::replace(&mut x_cur, x_next);
    }
    assert!(worst <= 1e-10, "{}: deviation {worst:e}", t.label());

    if p.nonsmooth().is_zero() {
        let (mut a, mut b) = (states[0].x.clone(), states[1].x.clone());
        let mut worst: f64 = 0.0;
        for state in &states[2..] {
            let next = step_smooth_eliminated(&t, &p, gamma, &a, &b).unwrap();
            worst = worst.max((&next - &state.x).amax());
            a = std::mem::replace(&mut b, next);
        }
        assert!(worst <= 1e-10, "{}: smooth deviation {worst:e}", t.label());
    }
}

#[test]
fn smooth_instances() {
    for (i, preset) in Preset::table().into_iter().enumerate() {
        if preset.build(&lazy_ring(7)).is_ok() {
            check(NonsmoothTerm::Zero, preset, 100 + i as u64);
        }
    }
}

#[test]
fn l1_instances() {
    for (i, preset) in [Preset::Extra, Preset::Nids, Preset::NextAugdgm, Preset::Diging].into_iter().enumerate() {
        check(NonsmoothTerm::L1 { weight: 0.3 }, preset, 200 + i as u64);
    }
}

#[test]
fn box_instance() {
    let g = NonsmoothTerm::BoxConstraint {
        lower: vec![-0.5; 4],
        upper: vec![0.5; 4],
    };
    check(g, Preset::Nids, 7);
}

#[test]
fn smooth_form_refuses_nonsmooth_problems() {
    let w = lazy_ring(4);
    let p = problem(4, 2, 1, 10.0, NonsmoothTerm::L1 { weight: 0.1 });
    let t = Preset::Nids.build(&w).unwrap();
    let x = Mat::zeros(4, 2);
    assert!(step_smooth_eliminated(&t, &p, 0.1, &x, &x).is_err());
}

#[test]
fn zero_gradient_consensus_is_stationary() {
    use unified_prox::linalg::Vector;
    use unified_prox::{CompositeProblem, QuadraticCost};
    let q = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let x0 = Vector::from_vec(vec![0.4, -1.1]);
    let cost = QuadraticCost::new(q.clone(), &q * &x0).unwrap();
    let p = CompositeProblem::new(vec![cost; 5], NonsmoothTerm::Zero).unwrap();
    let t = Preset::Extra.build(&lazy_ring(5)).unwrap();
    let x = unified_prox::linalg::consensus_matrix(5, &x0);
    let (z, x_next) = step_eliminated(&t, &p, 0.2, &x, &x, &x, &x).unwrap();
    assert!((&z - &x).amax() < 1e-15 && (&x_next - &x).amax() < 1e-15);
}
