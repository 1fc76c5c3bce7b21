//! Measures of performance (MoPs), the calibration objective, evaluation
//! errors (MoEs) and the parameter-set similarity index.

pub mod moe;
pub mod mop;
pub mod similarity;

pub use moe::{cutin_error, evaluate_moes, CutinErrorParams, MoeReport};
pub use mop::{
    accuracy, compute_traffic_mops, compute_vehicle_mops, goodness_of_fit, MetricConfig, MopEntry, MopId, MopVector,
};
pub use similarity::jaccard_similarity;
