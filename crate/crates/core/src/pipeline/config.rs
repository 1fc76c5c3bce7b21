//! Calibration configuration, read from a single TOML file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::fielddata::{EventConfig, PreprocessConfig};
use crate::metrics::{CutinErrorParams, MetricConfig, MopId};
use crate::roadsim::{ScenarioConfig, BACKGROUND_CLASS, SUBJECT_CLASS};
use crate::roadsim::lane_change::LANE_CHANGE_PARAM_NAMES;
use crate::saga::SagaConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Root of every random stream in the run; overrides `scenario.seed`.
    pub master_seed: u64,
    /// Run directory for artifacts; nothing is written when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_data: Option<PathBuf>,
    /// Simulation runs per evaluation; their MoPs are averaged.
    pub replications: usize,
    /// Evaluations dispatched together. Early stopping is checked between
    /// batches, so 1 reproduces a strictly sequential search.
    pub batch_size: usize,
    pub scenario: ScenarioConfig,
    /// Applied to the field data only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessConfig>,
    pub events: EventConfig,
    /// Lane count per road name for densities; defaults to the network.
    pub lanes: BTreeMap<String, u32>,
    pub cutin: CutinErrorParams,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Config {
    /// Parameter ids; empty means every entrance input.
    pub parameters: Vec<String>,
    /// Relative half-width of the search interval around the initial value.
    pub delta: f64,
    pub levels: usize,
    pub accuracy_threshold: f64,
    /// Add the density on each road to the MoPs, which separates the
    /// effect of inputs that feed different roads.
    pub road_densities: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage2Config {
    /// Candidate ids; empty means the default behaviour parameters.
    pub parameters: Vec<String>,
    /// Explicit `[lower, upper]` per id, instead of `delta` around the
    /// initial value.
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub delta: f64,
    pub levels: usize,
    /// Critical parameters passed on to the genetic search.
    pub k: usize,
    pub mops: Vec<MopId>,
    /// `saga.seed` is replaced by one derived from the master seed.
    pub saga: SagaConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            master_seed: 0,
            output_dir: None,
            field_data: None,
            replications: 1,
            batch_size: 4,
            scenario: ScenarioConfig::default(),
            preprocess: None,
            events: EventConfig::default(),
            lanes: BTreeMap::new(),
            cutin: CutinErrorParams::default(),
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
        }
    }
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            parameters: Vec::new(),
            delta: 0.2,
            levels: 4,
            accuracy_threshold: 0.8,
            road_densities: false,
        }
    }
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            parameters: Vec::new(),
            bounds: BTreeMap::new(),
            delta: 0.2,
            levels: 4,
            k: 10,
            mops: MopId::vehicle_defaults(),
            saga: SagaConfig::default(),
        }
    }
}

/// At most this many behaviour parameters are picked by default.
const DEFAULT_CANDIDATES: usize = 20;

/// Behaviour parameters of the background and subject classes, background
/// first. Desired speeds are left out: they set the traffic state that the
/// first stage matches, and the subject's is fixed by the scenario. List
/// them explicitly to calibrate them here.
pub fn default_stage2_candidates(scenario: &ScenarioConfig) -> Vec<String> {
    let mut ids = Vec::new();
    for class in [BACKGROUND_CLASS, SUBJECT_CLASS] {
        let Some(c) = scenario.behavior.get(class) else {
            continue;
        };
        let desired = c.cf.desired_speed();
        for name in c.cf.param_names() {
            if c.cf.get(name) == Some(desired) {
                continue;
            }
            ids.push(format!("{class}.cf.{name}"));
        }
        ids.extend(LANE_CHANGE_PARAM_NAMES.iter().map(|n| format!("{class}.lc.{n}")));
    }
    ids.truncate(DEFAULT_CANDIDATES);
    ids
}

impl CalibrationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn stage1_parameters(&self) -> Vec<String> {
        if self.stage1.parameters.is_empty() {
            let mut ids: Vec<String> = self
                .scenario
                .network
                .entrances
                .iter()
                .map(|e| format!("input.{}", e.id))
                .collect();
            ids.sort();
            ids
        } else {
            self.stage1.parameters.clone()
        }
    }

    pub fn stage2_parameters(&self) -> Vec<String> {
        if self.stage2.parameters.is_empty() {
            default_stage2_candidates(&self.scenario)
        } else {
            self.stage2.parameters.clone()
        }
    }

    /// Densities use the detection window of the scenario and the lane
    /// counts of its network unless overridden.
    pub fn metric_config(&self) -> MetricConfig {
        let mut lanes: BTreeMap<String, u32> = BTreeMap::new();
        for l in &self.scenario.network.links {
            let e = lanes.entry(l.road_name().to_string()).or_insert(0);
            *e = (*e).max(l.lane_count);
        }
        lanes.extend(self.lanes.iter().map(|(k, v)| (k.clone(), *v)));
        MetricConfig {
            detection_range: self.scenario.detection_range,
            lanes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.cutin.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, d) in [("stage1", self.stage1.delta), ("stage2", self.stage2.delta)] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!("{name}.delta must lie in (0, 1)")));
            }
        }
        let n2 = self.stage2_parameters().len();
        if self.stage2.k > n2 {
            return Err(Error::Config(format!(
                "stage2.k = {} exceeds the {n2} candidate parameters",
                self.stage2.k
            )));
        }
        for id in self.stage1_parameters().iter().chain(&self.stage2_parameters()) {
            self.scenario.get_param(id)?;
        }
        for (id, [lo, hi]) in &self.stage2.bounds {
            if !(lo < hi) {
                return Err(Error::Config(format!("bounds for {id}: {lo} is not below {hi}")));
            }
        }
        let mut saga = self.stage2.saga.clone();
        saga.seed = 0;
        saga.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = CalibrationConfig::default();
        c.validate().unwrap();
        assert_eq!(c.stage2_parameters().len(), 20);
        assert_eq!(c.stage1_parameters(), ["input.E1", "input.E2", "input.E3", "input.E4"]);
        let back = CalibrationConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn default_candidates_skip_desired_speeds() {
        let ids = default_stage2_candidates(&ScenarioConfig::default());
        assert!(ids.contains(&"background.cf.T".to_string()));
        assert!(!ids.iter().any(|id| id.ends_with(".v0")));
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = CalibrationConfig::from_toml("master_seed = 9\n[stage2]\nk = 3\n").unwrap();
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.stage2.k, 3);
        assert_eq!(c.stage1.levels, 4);
    }
}
