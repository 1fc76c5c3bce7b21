//! Detection data handling: CSV parsing and export, preprocessing, and
//! extraction of lane changes, cut-ins and car-following episodes.
//!
//! Field recordings and virtual-detector output share one format, so both
//! sides of a calibration go through exactly the same code.

pub mod events;
pub mod io;
pub mod preprocess;

use serde::{Deserialize, Serialize};

use crate::schema::{DetectionLog, DetectionRecord};

pub use events::{
    detect_car_following, detect_cut_ins, detect_lane_changes, extract_events, Actor, CarFollowingEpisode,
    export_events_csv, CutInEvent, EventConfig, EventSet, LaneChangeEvent,
};
pub use io::{export_csv, parse_field_data, read_field_data, write_field_data, AngleUnit, ParseOptions};
pub use preprocess::{preprocess, preprocess_flagged, PreprocessConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Field,
    Simulation,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: DataSource,
    /// Median spacing of timestamps, s.
    pub collection_interval: Option<f64>,
    pub route: Option<String>,
    /// Names of non-canonical columns, in file order.
    pub extra_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldDataset {
    pub records: Vec<DetectionRecord>,
    pub meta: DatasetMeta,
}

impl FieldDataset {
    pub fn new(records: Vec<DetectionRecord>, source: DataSource) -> Self {
        let mut d = FieldDataset {
            records,
            meta: DatasetMeta {
                source,
                ..DatasetMeta::default()
            },
        };
        d.meta.collection_interval = d.median_interval();
        d.meta.route = d.route_description();
        d
    }

    pub fn from_detection_log(log: DetectionLog) -> Self {
        FieldDataset::new(log.records, DataSource::Simulation)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Last minus first timestamp.
    pub fn duration(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    pub fn median_interval(&self) -> Option<f64> {
        let mut d: Vec<f64> = self
            .records
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .filter(|d| *d > 0.0)
            .collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }

    /// Road names in visiting order, consecutive repeats collapsed.
    fn route_description(&self) -> Option<String> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.records {
            if names.last() != Some(&r.road_name.as_str()) {
                names.push(&r.road_name);
            }
        }
        (!names.is_empty()).then(|| names.join(" > "))
    }
}
