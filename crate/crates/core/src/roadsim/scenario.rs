//! Scenario configuration: network, demand, behaviour classes and run timing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lane_change::LaneChangeParams;
use super::models::{CarFollowingParams, IdmParams};
use super::network::RoadNetwork;
use super::vehicle::DEFAULT_VEHICLE_LENGTH;
use crate::{Error, Result};

pub const SUBJECT_CLASS: &str = "subject";
pub const BACKGROUND_CLASS: &str = "background";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleClass {
    pub cf: CarFollowingParams,
    #[serde(default)]
    pub lc: LaneChangeParams,
    #[serde(default = "default_length")]
    pub length: f64,
    /// Each vehicle's desired speed is the class value times a factor drawn
    /// uniformly from `[1 - spread, 1 + spread]`.
    #[serde(default)]
    pub desired_speed_spread: f64,
}

fn default_length() -> f64 {
    DEFAULT_VEHICLE_LENGTH
}

impl Default for VehicleClass {
    fn default() -> Self {
        VehicleClass {
            cf: CarFollowingParams::Idm(IdmParams::default()),
            lc: LaneChangeParams::default(),
            length: DEFAULT_VEHICLE_LENGTH,
            desired_speed_spread: 0.0,
        }
    }
}

/// Longitudinal detection window around the subject, m; rear is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRange {
    pub rear: f64,
    pub front: f64,
}

impl Default for DetectionRange {
    fn default() -> Self {
        DetectionRange {
            rear: -150.0,
            front: 150.0,
        }
    }
}

impl DetectionRange {
    pub fn contains(&self, rel: f64) -> bool {
        rel >= self.rear && rel <= self.front
    }

    pub fn length(&self) -> f64 {
        self.front - self.rear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub network: RoadNetwork,
    /// Entrance id → pcu/h.
    pub entrance_inputs: BTreeMap<String, f64>,
    /// Behaviour per vehicle class. The `subject` class drives the subject
    /// vehicle; entrances reference the others.
    pub behavior: BTreeMap<String, VehicleClass>,
    /// Overrides the desired speed of the subject class, km/h.
    pub subject_desired_speed_kmh: f64,
    /// Defaults to the end of the warm-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_depart_time: Option<f64>,
    #[serde(default = "default_start_lane")]
    pub subject_start_lane: u32,
    /// Re-enter the route after finishing it, so the subject is observed for
    /// the whole run.
    #[serde(default = "yes")]
    pub subject_repeat: bool,
    pub total_time: f64,
    pub warmup_time: f64,
    pub time_step: f64,
    #[serde(default)]
    pub detection_range: DetectionRange,
    pub seed: u64,
}

fn default_start_lane() -> u32 {
    1
}

fn yes() -> bool {
    true
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let network = RoadNetwork::corridor(4, 500.0, 3, 80.0, 4);
        let entrance_inputs = network
            .entrances
            .iter()
            .map(|e| (e.id.clone(), 600.0))
            .collect();
        let mut behavior = BTreeMap::new();
        behavior.insert(
            BACKGROUND_CLASS.to_string(),
            VehicleClass {
                desired_speed_spread: 0.1,
                ..VehicleClass::default()
            },
        );
        behavior.insert(SUBJECT_CLASS.to_string(), VehicleClass::default());
        ScenarioConfig {
            network,
            entrance_inputs,
            behavior,
            subject_desired_speed_kmh: 60.0,
            subject_depart_time: None,
            subject_start_lane: 1,
            subject_repeat: true,
            total_time: 1750.0,
            warmup_time: 600.0,
            time_step: 0.1,
            detection_range: DetectionRange::default(),
            seed: 0,
        }
    }
}

/// Where a named calibration parameter lives inside a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamPath<'a> {
    /// `input.<entrance>`
    Input(&'a str),
    /// `<class>.cf.<name>`
    CarFollowing(&'a str, &'a str),
    /// `<class>.lc.<name>`
    LaneChange(&'a str, &'a str),
}

impl<'a> ParamPath<'a> {
    pub fn parse(id: &'a str) -> Result<Self> {
        let parts: Vec<&str> = id.split('.').collect();
        match parts.as_slice() {
            ["input", e] => Ok(ParamPath::Input(e)),
            [class, "cf", name] => Ok(ParamPath::CarFollowing(class, name)),
            [class, "lc", name] => Ok(ParamPath::LaneChange(class, name)),
            _ => Err(Error::UnknownParameter(id.to_string())),
        }
    }
}

impl ScenarioConfig {
    /// Number of steps; the log holds one frame per step.
    pub fn step_count(&self) -> usize {
        (self.total_time / self.time_step).round() as usize
    }

    /// First step whose frame is outside the warm-up.
    pub fn warmup_steps(&self) -> usize {
        (self.warmup_time / self.time_step).round() as usize
    }

    pub fn subject_depart(&self) -> f64 {
        self.subject_depart_time.unwrap_or(self.warmup_time)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if !(self.time_step > 0.0) {
            return Err(Error::Config("time_step must be positive".into()));
        }
        if !(self.warmup_time >= 0.0 && self.warmup_time < self.total_time) {
            return Err(Error::Config("need 0 <= warmup_time < total_time".into()));
        }
        let r = self.detection_range;
        if !(r.rear < 0.0 && r.front > 0.0) {
            return Err(Error::Config("detection range must satisfy rear < 0 < front".into()));
        }
        if !(self.subject_desired_speed_kmh > 0.0) {
            return Err(Error::Config("subject desired speed must be positive".into()));
        }
        for (id, q) in &self.entrance_inputs {
            if !self.network.entrances.iter().any(|e| &e.id == id) {
                return Err(Error::Config(format!("input for unknown entrance `{id}`")));
            }
            if !(q.is_finite() && *q >= 0.0) {
                return Err(Error::Config(format!("input at `{id}` must be >= 0")));
            }
        }
        for e in &self.network.entrances {
            if !self.behavior.contains_key(&e.class) {
                return Err(Error::Config(format!(
                    "entrance `{}` uses undefined class `{}`",
                    e.id, e.class
                )));
            }
        }
        if !self.behavior.contains_key(SUBJECT_CLASS) {
            return Err(Error::Config("behavior table lacks the `subject` class".into()));
        }
        for (name, class) in &self.behavior {
            class.cf.validate().map_err(|e| Error::Config(format!("class `{name}`: {e}")))?;
            class.lc.validate().map_err(|e| Error::Config(format!("class `{name}`: {e}")))?;
            if !(class.length > 0.0) {
                return Err(Error::Config(format!("class `{name}`: length must be positive")));
            }
            if !(0.0..1.0).contains(&class.desired_speed_spread) {
                return Err(Error::Config(format!(
                    "class `{name}`: desired_speed_spread must lie in [0, 1)"
                )));
            }
        }
        let first = &self.network.subject_route[0];
        let lanes = self
            .network
            .links
            .iter()
            .find(|l| &l.id == first)
            .map_or(0, |l| l.lane_count);
        if self.subject_start_lane < 1 || self.subject_start_lane > lanes {
            return Err(Error::Config(format!(
                "subject_start_lane {} does not exist on `{first}`",
                self.subject_start_lane
            )));
        }
        Ok(())
    }

    pub fn get_param(&self, id: &str) -> Result<f64> {
        let unknown = || Error::UnknownParameter(id.to_string());
        match ParamPath::parse(id)? {
            ParamPath::Input(e) => {
                if !self.network.entrances.iter().any(|x| x.id == e) {
                    return Err(unknown());
                }
                Ok(self.entrance_inputs.get(e).copied().unwrap_or(0.0))
            }
            ParamPath::CarFollowing(c, n) => self.behavior.get(c).and_then(|k| k.cf.get(n)).ok_or_else(unknown),
            ParamPath::LaneChange(c, n) => self.behavior.get(c).and_then(|k| k.lc.get(n)).ok_or_else(unknown),
        }
    }

    pub fn set_param(&mut self, id: &str, value: f64) -> Result<()> {
        let unknown = || Error::UnknownParameter(id.to_string());
        match ParamPath::parse(id)? {
            ParamPath::Input(e) => {
                if !self.network.entrances.iter().any(|x| x.id == e) {
                    return Err(unknown());
                }
                self.entrance_inputs.insert(e.to_string(), value);
                Ok(())
            }
            ParamPath::CarFollowing(c, n) => {
                let class = self.behavior.get_mut(c).ok_or_else(unknown)?;
                class.cf.set(n, value).map_err(|_| unknown())
            }
            ParamPath::LaneChange(c, n) => {
                let class = self.behavior.get_mut(c).ok_or_else(unknown)?;
                class.lc.set(n, value).map_err(|_| unknown())
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.step_count(), 17500);
        assert_eq!(c.warmup_steps(), 6000);
    }

    #[test]
    fn parameter_paths() {
        let mut c = ScenarioConfig::default();
        c.set_param("input.E2", 900.0).unwrap();
        assert_eq!(c.get_param("input.E2").unwrap(), 900.0);
        c.set_param("background.cf.T", 1.2).unwrap();
        assert_eq!(c.get_param("background.cf.T").unwrap(), 1.2);
        c.set_param("subject.lc.max_decel_own", -5.0).unwrap();
        assert_eq!(c.get_param("subject.lc.max_decel_own").unwrap(), -5.0);
        assert!(c.set_param("input.E9", 1.0).is_err());
        assert!(c.set_param("background.cf.CC0", 1.0).is_err());
        assert!(c.get_param("nonsense").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c = ScenarioConfig::from_toml(
            "total_time = 900.0\n\
             [behavior.background.cf]\nmodel = \"IDM\"\nT = 1.2\n\
             [behavior.subject.cf]\nmodel = \"Krauss\"\n",
        )
        .unwrap();
        assert_eq!(c.total_time, 900.0);
        assert_eq!(c.network, ScenarioConfig::default().network);
        assert_eq!(c.get_param("background.cf.T").unwrap(), 1.2);
        assert_eq!(c.get_param("background.cf.s0").unwrap(), 2.0);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_timing_rejected() {
        let mut c = ScenarioConfig::default();
        c.warmup_time = c.total_time;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.detection_range.rear = 10.0;
        assert!(c.validate().is_err());
    }
}
