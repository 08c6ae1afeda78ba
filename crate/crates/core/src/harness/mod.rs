//! End-to-end experiments: truths, approximation targets, contraction sweeps and tail checks.

pub mod approx;
pub mod experiment;
pub mod tails;
pub mod truth;

pub use approx::{best_spline_fit, least_squares_spline, ApproximationTarget};
pub use experiment::{
    contraction_experiment, rate_slope, ContractionConfig, ExperimentResult, RadiusRule,
    RateStatistic,
};
pub use truth::{make_truth, MadeTruth, NamedFunction, Truth, TruthSpec};
