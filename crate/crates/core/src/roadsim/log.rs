//! Simulator output: per-step frames and discrete events.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::vehicle::{VehicleId, VehicleKind, VehicleState};
use crate::Result;

/// State of every vehicle at the start of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub step: u64,
    /// `step * time_step`
    pub time: f64,
    pub warmup: bool,
    /// Sorted by vehicle id.
    pub vehicles: Vec<VehicleState>,
}

impl Frame {
    pub fn subject(&self) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.kind == VehicleKind::Subject)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Spawn { link: usize, lane: u32 },
    Despawn { link: usize },
    LaneChange { link: usize, from_lane: u32, to_lane: u32 },
    Collision { leader: VehicleId, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub vehicle: VehicleId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// Every vehicle stood still for longer than the gridlock limit; the log
    /// ends at `time`.
    Gridlock { time: f64 },
}

/// Counters kept while a scenario runs, whether or not frames are stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    pub spawned: u64,
    pub despawned: u64,
    pub lane_changes: u64,
    pub collisions: u64,
    /// Vehicles still waiting at entrances when the run ended.
    pub queued: u64,
    pub outcome: Option<Outcome>,
}

impl RunSummary {
    pub fn is_gridlock(&self) -> bool {
        matches!(self.outcome, Some(Outcome::Gridlock { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub time_step: f64,
    pub frames: Vec<Frame>,
    pub events: Vec<Event>,
    pub summary: RunSummary,
}

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "step",
    "time",
    "warmup",
    "vehicle_id",
    "kind",
    "link",
    "lane",
    "position",
    "lateral_offset",
    "speed",
    "acceleration",
    "heading_deg",
];

impl TrajectoryLog {
    pub fn outcome(&self) -> Outcome {
        self.summary.outcome.unwrap_or(Outcome::Completed)
    }

    pub fn collision_count(&self) -> u64 {
        self.summary.collisions
    }

    /// One row per (step, vehicle); `link` is the link id.
    pub fn write_csv<W: Write>(&self, link_ids: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRAJECTORY_HEADER)?;
        for f in &self.frames {
            for v in &f.vehicles {
                let kind = match v.kind {
                    VehicleKind::Subject => "subject",
                    VehicleKind::Background => "background",
                };
                w.write_record([
                    f.step.to_string(),
                    f.time.to_string(),
                    u8::from(f.warmup).to_string(),
                    v.id.to_string(),
                    kind.to_string(),
                    link_ids[v.link].clone(),
                    v.lane.to_string(),
                    v.position.to_string(),
                    v.lateral_offset.to_string(),
                    v.speed.to_string(),
                    v.acceleration.to_string(),
                    v.heading_deg.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| crate::Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "vehicle_id", "event", "detail"])?;
        for e in &self.events {
            let (name, detail) = match &e.kind {
                EventKind::Spawn { link, lane } => ("spawn", format!("link={link} lane={lane}")),
                EventKind::Despawn { link } => ("despawn", format!("link={link}")),
                EventKind::LaneChange {
                    link,
                    from_lane,
                    to_lane,
                } => ("lane_change", format!("link={link} {from_lane}->{to_lane}")),
                EventKind::Collision { leader, gap } => ("collision", format!("leader={leader} gap={gap}")),
            };
            w.write_record([e.time.to_string(), e.vehicle.to_string(), name.to_string(), detail])?;
        }
        w.flush().map_err(|e| crate::Error::io("<event csv>", e))?;
        Ok(())
    }
}
