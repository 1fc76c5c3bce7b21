//! Two-stage calibration of a microscopic traffic simulator against
//! trajectory data recorded by an automated vehicle.
//!
//! The crate is split along the calibration workflow:
//!
//! - [`roadsim`]: deterministic discrete-time simulator (car following, lane
//!   changing, Poisson entrance demand) with a virtual detector mounted on the
//!   subject vehicle.
//! - [`fielddata`]: parsing, preprocessing and event extraction (car-following
//!   episodes, lane changes, cut-ins) for detection logs, real or simulated.
//! - [`metrics`]: measures of performance, goodness of fit and the evaluation
//!   error measures.
//! - [`doe`]: orthogonal arrays, level mapping and range analysis.
//! - [`saga`]: the adaptive genetic algorithm used to refine critical
//!   parameters.
//! - [`pipeline`]: traffic-flow stage, behaviour stage and full calibration
//!   runs with persisted artifacts.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod doe;
pub mod error;
pub mod fielddata;
pub mod metrics;
pub mod pipeline;
pub mod roadsim;
pub mod saga;
pub mod schema;
mod score;
pub mod seed;

pub use error::{Error, Result};
