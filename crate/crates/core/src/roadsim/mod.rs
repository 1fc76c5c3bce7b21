//! Discrete-time microscopic traffic simulator with a virtual detector on the
//! subject vehicle.

pub mod detector;
pub mod lane_change;
pub mod log;
pub mod models;
pub mod network;
pub mod scenario;
pub mod spawn;
pub mod vehicle;
pub mod world;

pub use detector::{virtual_detector_sample, Detector};
pub use lane_change::{lane_change_decision, LaneChangeDecision, LaneChangeParams};
pub use log::{Event, EventKind, Frame, Outcome, RunSummary, TrajectoryLog};
pub use models::{car_following_acceleration, CarFollowingParams, Leader};
pub use network::{Entrance, Link, RoadNetwork};
pub use scenario::{DetectionRange, ScenarioConfig, VehicleClass, BACKGROUND_CLASS, SUBJECT_CLASS};
pub use spawn::PoissonArrivals;
pub use vehicle::{VehicleId, VehicleKind, VehicleState};
pub use world::{run_scenario, run_scenario_with, FrameFilter, VehicleSpec, World};
