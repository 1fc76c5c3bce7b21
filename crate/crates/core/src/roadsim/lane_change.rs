//! Gap-acceptance lane changing: a change must be safe for the changer and for
//! the new follower, and must buy a minimum acceleration advantage.

use serde::{Deserialize, Serialize};

use super::models::{CarFollowingParams, Leader};
use super::vehicle::VehicleState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneChangeParams {
    /// Scales both minimum headways while a change is under way.
    pub safe_dist_reduction: f64,
    /// m
    pub min_headway_front: f64,
    /// m
    pub min_headway_rear: f64,
    /// Most severe deceleration the new follower may be forced into, negative.
    pub max_decel_trailing: f64,
    /// Most severe deceleration the changer accepts behind its new leader, negative.
    pub max_decel_own: f64,
    /// Required acceleration gain, m/s².
    pub advantage_threshold: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        LaneChangeParams {
            safe_dist_reduction: 0.6,
            min_headway_front: 2.0,
            min_headway_rear: 2.0,
            max_decel_trailing: -3.0,
            max_decel_own: -4.0,
            advantage_threshold: 0.3,
        }
    }
}

pub const LANE_CHANGE_PARAM_NAMES: &[&str] = &[
    "safe_dist_reduction",
    "min_headway_front",
    "min_headway_rear",
    "max_decel_trailing",
    "max_decel_own",
    "advantage_threshold",
];

impl LaneChangeParams {
    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "safe_dist_reduction" => &mut self.safe_dist_reduction,
            "min_headway_front" => &mut self.min_headway_front,
            "min_headway_rear" => &mut self.min_headway_rear,
            "max_decel_trailing" => &mut self.max_decel_trailing,
            "max_decel_own" => &mut self.max_decel_own,
            "advantage_threshold" => &mut self.advantage_threshold,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = self
            .slot(name)
            .ok_or_else(|| Error::UnknownParameter(format!("lc.{name}")))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safe_dist_reduction > 0.0 && self.safe_dist_reduction <= 1.0) {
            return Err(Error::Config("safe_dist_reduction must lie in (0, 1]".into()));
        }
        if !(self.min_headway_front > 0.0 && self.min_headway_rear > 0.0) {
            return Err(Error::Config("lane-change minimum headways must be positive".into()));
        }
        if !(self.max_decel_trailing < 0.0 && self.max_decel_own < 0.0) {
            return Err(Error::Config("lane-change deceleration bounds must be negative".into()));
        }
        if !self.advantage_threshold.is_finite() {
            return Err(Error::Config("advantage_threshold must be finite".into()));
        }
        Ok(())
    }
}

/// Vehicle behind the gap in the target lane. `gap` runs from its front
/// bumper to the changer's rear bumper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Follower {
    pub gap: f64,
    pub speed: f64,
    pub accel: f64,
    pub model: CarFollowingParams,
}

/// Neighbours in one adjacent lane; `None` entries mean an empty lane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetLane {
    pub leader: Option<Leader>,
    pub follower: Option<Follower>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Surroundings {
    pub current_leader: Option<Leader>,
    /// `None` when there is no lane on that side.
    pub left: Option<TargetLane>,
    pub right: Option<TargetLane>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneChangeDecision {
    Stay,
    ChangeLeft,
    ChangeRight,
}

/// Acceleration gain of moving into `target`, or `None` if the move is unsafe.
pub fn target_lane_advantage(
    vehicle: &VehicleState,
    current_leader: Option<&Leader>,
    target: &TargetLane,
    params: &LaneChangeParams,
    cf: &CarFollowingParams,
    dt: f64,
) -> Option<f64> {
    let f = params.safe_dist_reduction;
    if let Some(l) = &target.leader {
        if l.gap < f * params.min_headway_front {
            return None;
        }
    }
    if let Some(fol) = &target.follower {
        if fol.gap < f * params.min_headway_rear {
            return None;
        }
        let as_leader = Leader {
            gap: fol.gap,
            speed: vehicle.speed,
            accel: vehicle.acceleration,
            length: vehicle.length,
        };
        let induced = fol.model.raw_acceleration(fol.speed, fol.accel, Some(&as_leader), dt);
        if induced < params.max_decel_trailing {
            return None;
        }
    }
    let a_target = cf.raw_acceleration(vehicle.speed, vehicle.acceleration, target.leader.as_ref(), dt);
    if a_target < params.max_decel_own {
        return None;
    }
    let a_current = cf.raw_acceleration(vehicle.speed, vehicle.acceleration, current_leader, dt);
    Some(a_target - a_current)
}

/// Decide whether `vehicle` changes lane this step. When both sides qualify
/// the larger advantage wins, ties going left.
pub fn lane_change_decision(
    vehicle: &VehicleState,
    around: &Surroundings,
    params: &LaneChangeParams,
    cf: &CarFollowingParams,
    dt: f64,
) -> LaneChangeDecision {
    let gain = |side: &Option<TargetLane>| {
        side.as_ref()
            .and_then(|t| target_lane_advantage(vehicle, around.current_leader.as_ref(), t, params, cf, dt))
            .filter(|g| *g > params.advantage_threshold)
    };
    match (gain(&around.left), gain(&around.right)) {
        (Some(l), Some(r)) if r > l => LaneChangeDecision::ChangeRight,
        (Some(_), _) => LaneChangeDecision::ChangeLeft,
        (None, Some(_)) => LaneChangeDecision::ChangeRight,
        (None, None) => LaneChangeDecision::Stay,
    }
}
