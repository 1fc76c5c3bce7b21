//! Detection record schema shared by field data and the virtual detector.
//!
//! One [`DetectionRecord`] per timestamp: environment fields, the subject
//! vehicle state and every surrounding vehicle inside the detection range.
//! Units follow the recorded data: speeds in km/h, relative positions in m,
//! longitude/latitude in rad, heading in degrees. Signs: front and left are
//! positive.

use serde::{Deserialize, Serialize};

pub const KMH_PER_MS: f64 = 3.6;

pub mod column {
    pub const TIMESTAMP: &str = "Timestamp";
    pub const ROAD_NAME: &str = "Road name";
    pub const SPEED_LIMIT: &str = "Speed limit";
    pub const SPEED: &str = "Speed";
    pub const YAW_RATE: &str = "Yaw rate";
    pub const LONGITUDE: &str = "Longitude";
    pub const LATITUDE: &str = "Latitude";
    pub const ACCELERATION: &str = "Acceleration";
    pub const LANE_ID: &str = "Lane ID";
    pub const LANE_DISTANCE: &str = "Lane distance";
    pub const VEHICLE_ID: &str = "Vehicle ID";
    pub const SURROUNDING_LANE_ID: &str = "Surrounding vehicle's Lane ID";
    pub const RELATIVE_LONGITUDINAL: &str = "Relative longitudinal position";
    pub const RELATIVE_LATERAL: &str = "Relative lateral position";
    pub const ABSOLUTE_VELOCITY: &str = "Absolute velocity";
    pub const VEHICLE_HEADING: &str = "Vehicle heading";

    /// Canonical long-format header: one row per (timestamp, surrounding
    /// vehicle); a timestamp without surrounding vehicles is one row with the
    /// surrounding columns left empty.
    pub const CANONICAL: [&str; 16] = [
        TIMESTAMP,
        ROAD_NAME,
        SPEED_LIMIT,
        SPEED,
        YAW_RATE,
        LONGITUDE,
        LATITUDE,
        ACCELERATION,
        LANE_ID,
        LANE_DISTANCE,
        VEHICLE_ID,
        SURROUNDING_LANE_ID,
        RELATIVE_LONGITUDINAL,
        RELATIVE_LATERAL,
        ABSOLUTE_VELOCITY,
        VEHICLE_HEADING,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectObservation {
    pub speed_kmh: f64,
    /// rad/s
    pub yaw_rate: f64,
    /// rad
    pub longitude: f64,
    /// rad
    pub latitude: f64,
    pub acceleration: f64,
    /// 1 is the rightmost lane.
    pub lane_id: u32,
    /// Lateral offset from the lane centerline, left positive.
    pub lane_distance: f64,
}

impl SubjectObservation {
    pub fn speed_ms(&self) -> f64 {
        self.speed_kmh / KMH_PER_MS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurroundingObservation {
    pub vehicle_id: String,
    pub lane_id: u32,
    /// Front positive.
    pub rel_longitudinal: f64,
    /// Left positive.
    pub rel_lateral: f64,
    pub speed_kmh: f64,
    pub heading_deg: f64,
    /// Values of non-canonical columns, in dataset column order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl SurroundingObservation {
    pub fn speed_ms(&self) -> f64 {
        self.speed_kmh / KMH_PER_MS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Seconds.
    pub timestamp: f64,
    pub road_name: String,
    pub speed_limit_kmh: f64,
    pub subject: SubjectObservation,
    pub surrounding: Vec<SurroundingObservation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

/// Detection records produced by the virtual detector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionLog {
    pub records: Vec<DetectionRecord>,
}
