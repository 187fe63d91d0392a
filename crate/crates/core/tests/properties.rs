mod common;

use std::sync::Arc;

use proptest::prelude::*;
use unified_prox::algorithm::{run, AlgorithmState};
use unified_prox::certify::empirical_rate;
use unified_prox::linalg::{self, Mat, Vector};
use unified_prox::splitting::verify_consensus_isometry;
use unified_prox::tradeoff::{chebyshev_mixing_factor, rounds_chebyshev, rounds_plain};
use unified_prox::{GossipMatrix, Graph, NonsmoothTerm, Preset, QuadraticCost};

fn chebyshev_t(k: usize, x: f64) -> f64 {
    let k = k as f64;
    if x.abs() <= 1.0 {
        (k * x.acos()).cos()
    } else if x > 1.0 {
        (k * x.acosh()).cosh()
    } else {
        let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
        sign * (k * (-x).acosh()).cosh()
    }
}

fn geometric(m: usize, seed: u64) -> GossipMatrix {
    GossipMatrix::metropolis(Arc::new(Graph::random_geometric(m, 0.6, seed).unwrap()))
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_is_firmly_nonexpansive(u in vec_strategy(4), v in vec_strategy(4), gamma in 0.01..3.0f64, w in 0.0..2.0f64, boxed in any::<bool>()) {
        let g = if boxed {
            NonsmoothTerm::BoxConstraint { lower: vec![-1.0, -0.5, 0.0, -2.0], upper: vec![1.0, 0.5, 3.0, -1.0] }
        } else {
            NonsmoothTerm::L1 { weight: w }
        };
        let cost = QuadraticCost::new(Mat::identity(4, 4), Vector::zeros(4)).unwrap();
        let p = unified_prox::CompositeProblem::new(vec![cost], g).unwrap();
        let (u, v) = (Vector::from_vec(u), Vector::from_vec(v));
        let (pu, pv) = (p.prox_vector(gamma, &u), p.prox_vector(gamma, &v));
        let diff = &pu - &pv;
        prop_assert!(diff.norm_squared() <= diff.dot(&(&u - &v)) + 1e-12);
    }

    #[test]
    fn gradients_are_affine(x in vec_strategy(3), y in vec_strategy(3), a in -2.0..2.0f64, seed in 0u64..1000) {
        let p = common::problem(2, 3, seed, 10.0, NonsmoothTerm::Zero);
        let (x, y) = (Vector::from_vec(x), Vector::from_vec(y));
        let mix = &x * a + &y * (1.0 - a);
        for cost in p.costs() {
            let lhs = cost.gradient(&mix);
            let rhs = cost.gradient(&x) * a + cost.gradient(&y) * (1.0 - a);
            prop_assert!((lhs - rhs).amax() <= 1e-10 * (1.0 + x.amax() + y.amax()) * 10.0);
        }
    }

    #[test]
    fn metropolis_weights_are_doubly_stochastic(m in 3usize..20, seed in 0u64..500) {
        let w = geometric(m, seed);
        let e = w.entries();
        prop_assert!(linalg::is_symmetric(e, 1e-15));
        prop_assert!(linalg::row_sums(e).iter().all(|s| (s - 1.0).abs() < 1e-12));
        prop_assert!(w.spectral_info().is_valid());
        for i in 0..m {
            for j in 0..m {
                if i != j && !w.graph().has_edge(i, j) {
                    prop_assert_eq!(e[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn chebyshev_mixing_maps_the_spectrum(m in 3usize..14, seed in 0u64..300, k in 1usize..7, lazy in any::<bool>()) {
        let mut w = geometric(m, seed);
        if lazy {
            w = w.lazy();
        }
        let rho = w.spectral_info().mixing_radius;
        prop_assume!(rho > 1e-6);
        let p = w.chebyshev(k).unwrap();
        let mut expected: Vec<f64> = w.spectral_info().eigenvalues.iter()
            .map(|&l| chebyshev_t(k, l / rho) / chebyshev_t(k, 1.0 / rho))
            .collect();
        expected.sort_by(f64::total_cmp);
        let got = linalg::eigenvalues(p.entries());
        for (a, b) in got.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
        prop_assert_eq!(p.hop_order(), k);
    }

    #[test]
    fn acceleration_never_hurts(m in 3usize..=20, seed in 0u64..300, k in 1usize..8) {
        let w = geometric(m, seed).lazy();
        prop_assume!(w.spectral_info().mixing_radius > 1e-6);
        let accelerated = w.chebyshev(k).unwrap().spectral_info().mixing_radius;
        let powered = w.k_hop_power(k).unwrap().spectral_info().mixing_radius;
        prop_assert!(accelerated <= powered + 1e-12, "{} > {}", accelerated, powered);
    }

    #[test]
    fn dual_columns_stay_centered(m in 3usize..10, seed in 0u64..200, which in 0usize..10, l1 in any::<bool>()) {
        let w = geometric(m, seed).lazy();
        let preset = Preset::table()[which];
        let Ok(t) = preset.build(&w) else { return Ok(()) };
        prop_assume!(t.validate(1.0, 10.0).passes_structural());
        let g = if l1 { NonsmoothTerm::L1 { weight: 0.2 } } else { NonsmoothTerm::Zero };
        let p = common::problem(m, 2, seed, 10.0, g);
        let x_star = common::solution(&p);
        let gamma = 0.5 / p.l();
        let start = AlgorithmState::zeros(&t, &p, gamma).unwrap();
        let traj = run(&t, &p, gamma, 60, start, &x_star).unwrap();
        prop_assert!(traj.max_dual_drift <= 1e-12, "{}", traj.max_dual_drift);
    }

    #[test]
    fn round_counts_are_minimal(rc in 0.01..0.999f64, ro in 0.01..0.99f64) {
        let target = ro * ro;
        let kp = rounds_plain(rc, ro).unwrap();
        let kc = rounds_chebyshev(rc, ro).unwrap();
        prop_assert!(rc.powi(kp as i32) <= target * (1.0 + 1e-12));
        prop_assert!(kp == 1 || rc.powi(kp as i32 - 1) > target);
        prop_assert!(chebyshev_mixing_factor(rc, kc) <= target * (1.0 + 1e-12));
        prop_assert!(kc == 1 || chebyshev_mixing_factor(rc, kc - 1) > target);
        prop_assert!(kc <= kp);
    }

    #[test]
    fn consensus_isometry_holds(m in 2usize..12, seed in 0u64..100) {
        let g = if m == 2 { Graph::complete(2).unwrap() } else { Graph::ring(m).unwrap() };
        let w = GossipMatrix::metropolis(Arc::new(g));
        let t = Preset::Nids.build(&w).unwrap();
        prop_assert!(verify_consensus_isometry(&t, 3, 10, seed).pass);
    }

    #[test]
    fn geometric_decay_is_recovered(r in 0.05..0.99f64, scale in 1e-3..1e3f64) {
        let errs: Vec<f64> = (1..=80).map(|k| scale * r.powi(k)).collect();
        let est = empirical_rate(&errs).unwrap();
        prop_assert!((est.lambda - r).abs() < 1e-9);
    }
}
