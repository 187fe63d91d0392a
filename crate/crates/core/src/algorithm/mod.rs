//! The unified primal-dual iteration, its weight matrices and rate theory.

mod iterate;
mod preset;
mod rate;
mod triple;

pub use iterate::{
    measure, rows_to_csv, run, step, step_eliminated, step_smooth_eliminated, AlgorithmState, Trajectory, TrajectoryRow,
    DIVERGENCE_BOUND, TRAJECTORY_HEADER,
};
pub use preset::Preset;
pub use rate::{contraction_factor, rate_prediction, weight_ratio, RatePrediction};
pub use triple::{Condition, ConditionCheck, ConsensusOperator, TripleReport, WeightTriple};
