use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_VEHICLE_LENGTH: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u64);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Subject,
    Background,
}

/// Observable state of one vehicle at one timestep.
///
/// `position` is the front bumper, measured from the start of `link`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    /// Index into the network's link list.
    pub link: usize,
    /// 1 is the rightmost lane.
    pub lane: u32,
    pub position: f64,
    /// Offset from the lane centerline, left positive.
    pub lateral_offset: f64,
    pub speed: f64,
    pub acceleration: f64,
    /// Degrees relative to the road direction, left positive.
    pub heading_deg: f64,
    pub length: f64,
    pub kind: VehicleKind,
}

impl VehicleState {
    /// Free-standing state used by model-level code and tests.
    pub fn at_speed(speed: f64) -> Self {
        VehicleState {
            id: VehicleId(0),
            link: 0,
            lane: 1,
            position: 0.0,
            lateral_offset: 0.0,
            speed,
            acceleration: 0.0,
            heading_deg: 0.0,
            length: DEFAULT_VEHICLE_LENGTH,
            kind: VehicleKind::Background,
        }
    }
}
