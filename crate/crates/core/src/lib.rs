//! Unified primal-dual proximal framework for distributed composite
//! optimization over networks, with tools to certify its linear rate.
//!
//! Agents hold quadratic costs `f_i` and share a nonsmooth term `G`; the
//! iterate is parameterized by weight matrices `(A, B, C)` built from a
//! gossip matrix of the communication graph.

// `!(x > 0.0)` style checks are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod centralized;
pub mod certify;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod problem;
pub mod splitting;
pub mod tradeoff;

pub use algorithm::{AlgorithmState, Preset, RatePrediction, Trajectory, WeightTriple};
pub use error::{Error, Result};
pub use graph::{GossipMatrix, Graph, SpectralInfo};
pub use problem::{CompositeProblem, NonsmoothTerm, ProblemDocument, QuadraticCost};
