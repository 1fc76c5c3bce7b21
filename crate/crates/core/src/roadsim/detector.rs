//! Virtual onboard detector: turns simulator frames into detection records
//! shaped like the field data.
//!
//! Positions are arc lengths along the subject route, so a vehicle on the
//! next or previous link of the route is seen as long as it lies inside the
//! detection window. Vehicles on links off the route are never seen.

use super::log::{Frame, TrajectoryLog};
use super::network::CompiledNetwork;
use super::scenario::{DetectionRange, ScenarioConfig};
use super::vehicle::{VehicleKind, VehicleState};
use crate::schema::{DetectionLog, DetectionRecord, SubjectObservation, SurroundingObservation, KMH_PER_MS};
use crate::{Error, Result};

const EARTH_RADIUS: f64 = 6_371_000.0;

pub struct Detector {
    route_offset: Vec<Option<f64>>,
    road_names: Vec<String>,
    speed_limits_kmh: Vec<f64>,
    lane_width: f64,
    range: DetectionRange,
    time_step: f64,
    last: Option<(u64, f64)>,
}

impl Detector {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let net = CompiledNetwork::compile(&cfg.network)?;
        Ok(Detector {
            route_offset: net.route_offset,
            road_names: net.links.iter().map(|l| l.road_name().to_string()).collect(),
            speed_limits_kmh: net.links.iter().map(|l| l.speed_limit_kmh).collect(),
            lane_width: net.lane_width,
            range: cfg.detection_range,
            time_step: cfg.time_step,
            last: None,
        })
    }

    fn lateral(&self, v: &VehicleState) -> f64 {
        (f64::from(v.lane) - 0.5) * self.lane_width + v.lateral_offset
    }

    /// Record for `frame`, or `None` during warm-up or while the subject is
    /// off the road.
    pub fn observe(&mut self, frame: &Frame) -> Option<DetectionRecord> {
        if frame.warmup {
            return None;
        }
        let subject = frame.subject()?;
        let arc_sub = self.route_offset[subject.link]? + subject.position;
        let heading = subject.heading_deg.to_radians();
        let yaw_rate = match self.last {
            Some((step, h)) if step + 1 == frame.step => (heading - h) / self.time_step,
            _ => 0.0,
        };
        self.last = Some((frame.step, heading));

        let surrounding = frame
            .vehicles
            .iter()
            .filter(|v| v.kind == VehicleKind::Background)
            .filter_map(|v| {
                let rel = self.route_offset[v.link]? + v.position - arc_sub;
                self.range.contains(rel).then(|| SurroundingObservation {
                    vehicle_id: v.id.to_string(),
                    lane_id: v.lane,
                    rel_longitudinal: rel,
                    rel_lateral: self.lateral(v) - self.lateral(subject),
                    speed_kmh: v.speed * KMH_PER_MS,
                    heading_deg: v.heading_deg,
                    extra: Vec::new(),
                })
            })
            .collect();
        Some(DetectionRecord {
            timestamp: frame.time,
            road_name: self.road_names[subject.link].clone(),
            speed_limit_kmh: self.speed_limits_kmh[subject.link],
            subject: SubjectObservation {
                speed_kmh: subject.speed * KMH_PER_MS,
                yaw_rate,
                longitude: arc_sub / EARTH_RADIUS,
                latitude: self.lateral(subject) / EARTH_RADIUS,
                acceleration: subject.acceleration,
                lane_id: subject.lane,
                lane_distance: subject.lateral_offset,
            },
            surrounding,
            extra: Vec::new(),
        })
    }
}

/// Detection records for every post-warm-up frame of `log` with the subject
/// on the road.
pub fn virtual_detector_sample(log: &TrajectoryLog, cfg: &ScenarioConfig) -> Result<DetectionLog> {
    let mut det = Detector::new(cfg)?;
    let records: Vec<_> = log.frames.iter().filter_map(|f| det.observe(f)).collect();
    if records.is_empty() {
        return Err(Error::MissingSubject);
    }
    Ok(DetectionLog { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadsim::vehicle::VehicleId;

    fn vehicle(id: u64, link: usize, lane: u32, pos: f64, kind: VehicleKind) -> VehicleState {
        VehicleState {
            id: VehicleId(id),
            link,
            lane,
            position: pos,
            kind,
            ..VehicleState::at_speed(10.0)
        }
    }

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            warmup_time: 0.0,
            ..ScenarioConfig::default()
        }
    }

    fn frame(vehicles: Vec<VehicleState>) -> Frame {
        Frame {
            step: 0,
            time: 0.0,
            warmup: false,
            vehicles,
        }
    }

    #[test]
    fn boundary_and_sign_conventions() {
        let f = frame(vec![
            vehicle(0, 0, 1, 100.0, VehicleKind::Subject),
            vehicle(1, 0, 1, 130.0, VehicleKind::Background),
            vehicle(2, 0, 2, 251.0, VehicleKind::Background),
            vehicle(3, 0, 2, 250.0, VehicleKind::Background),
            vehicle(4, 0, 2, 60.0, VehicleKind::Background),
        ]);
        let rec = Detector::new(&cfg()).unwrap().observe(&f).unwrap();
        let ids: Vec<_> = rec.surrounding.iter().map(|s| s.vehicle_id.as_str()).collect();
        assert_eq!(ids, ["1", "3", "4"]);
        assert_eq!(rec.surrounding[0].rel_longitudinal, 30.0);
        assert_eq!(rec.surrounding[0].rel_lateral, 0.0);
        assert_eq!(rec.surrounding[1].rel_longitudinal, 150.0);
        assert_eq!(rec.surrounding[2].rel_longitudinal, -40.0);
        assert_eq!(rec.surrounding[2].rel_lateral, 3.5);
        assert!((rec.subject.speed_kmh - 36.0).abs() < 1e-12);
    }

    #[test]
    fn window_spans_link_boundaries() {
        let f = frame(vec![
            vehicle(0, 1, 1, 20.0, VehicleKind::Subject),
            vehicle(1, 0, 1, 480.0, VehicleKind::Background),
        ]);
        let rec = Detector::new(&cfg()).unwrap().observe(&f).unwrap();
        assert_eq!(rec.surrounding[0].rel_longitudinal, -40.0);
        assert_eq!(rec.road_name, "L2");
    }

    #[test]
    fn no_subject_is_an_error() {
        let log = TrajectoryLog {
            time_step: 0.1,
            frames: vec![frame(vec![vehicle(1, 0, 1, 0.0, VehicleKind::Background)])],
            events: vec![],
            summary: Default::default(),
        };
        assert!(matches!(virtual_detector_sample(&log, &cfg()), Err(Error::MissingSubject)));
    }
}
