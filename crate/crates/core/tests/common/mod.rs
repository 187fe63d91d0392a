#![allow(dead_code)]

use std::sync::Arc;

use unified_prox::linalg::{Mat, Vector};
use unified_prox::problem::{generate, GeneratorParams, Spectrum};
use unified_prox::{CompositeProblem, GossipMatrix, Graph, NonsmoothTerm};

pub fn ring(m: usize) -> GossipMatrix {
    GossipMatrix::metropolis(Arc::new(Graph::ring(m).unwrap()))
}

pub fn lazy_ring(m: usize) -> GossipMatrix {
    ring(m).lazy()
}

pub fn problem(m: usize, d: usize, seed: u64, kappa: f64, g: NonsmoothTerm) -> CompositeProblem {
    let params = GeneratorParams {
        seed,
        mu: 1.0,
        l: kappa,
        spectrum: Spectrum::Aligned,
        b_scale: 1.0,
    };
    generate(m, d, &params, g).unwrap()
}

pub fn solution(p: &CompositeProblem) -> Vector {
    p.reference_solution(1e-13).unwrap()
}

/// Consensual start `1vᵀ` with a fixed, non-trivial row.
pub fn consensual_start(m: usize, d: usize) -> Mat {
    Mat::from_fn(m, d, |_, j| 0.5 - 0.3 * j as f64)
}
