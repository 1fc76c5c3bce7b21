//! Synthetic field data with a known ground truth, for testing the
//! calibration end to end.
//!
//! [`recovery_case`] builds a small corridor whose "field" recording comes
//! from the simulator itself, with entrance inputs on the stage 1 grid and
//! two background car-following parameters moved away from their
//! defaults. The recording uses the seed of the first calibration
//! replication, so the true parameters reproduce it exactly and the search
//! is judged on the parameters rather than on sampling noise.

use crate::doe::{build_orthogonal_array, map_levels_to_values};
use crate::fielddata::{DataSource, FieldDataset};
use crate::roadsim::{RoadNetwork, ScenarioConfig};
use crate::saga::ParameterCombination;
use crate::seed::{derive_seed, tag};
use crate::{Error, Result};

use super::config::{default_stage2_candidates, CalibrationConfig};
use super::evaluate::simulate_dataset;
use super::stages::{build_parameter_space, CalibrationReport};

/// Simulates `scenario` with `truth` applied and `seed` as the run seed,
/// and labels the detector output as field data.
pub fn generate_field_data(scenario: &ScenarioConfig, truth: &ParameterCombination, seed: u64) -> Result<FieldDataset> {
    let mut sc = scenario.clone();
    for (id, v) in &truth.values {
        sc.set_param(id, *v)?;
    }
    sc.seed = seed;
    sc.validate()?;
    let sim = simulate_dataset(&sc)?;
    if sim.summary.is_gridlock() {
        return Err(Error::Infeasible("ground-truth scenario gridlocked".into()));
    }
    if sim.dataset.is_empty() {
        return Err(Error::MissingSubject);
    }
    Ok(FieldDataset::new(sim.dataset.records, DataSource::Field))
}

/// Parameters moved away from their defaults in the recovery case, with
/// the factor applied.
pub const PLANTED: [(&str, f64); 2] = [("background.cf.T", 1.2), ("background.cf.s0", 1.2)];

#[derive(Debug, Clone)]
pub struct RecoveryCase {
    pub config: CalibrationConfig,
    /// Entrance inputs followed by the planted parameters.
    pub truth: ParameterCombination,
    pub planted: Vec<String>,
    /// Spacing of the stage 1 grid per entrance input.
    pub level_step: Vec<(String, f64)>,
    pub field: FieldDataset,
}

/// Four entrances on a three-lane corridor, ten candidate behaviour
/// parameters, 16-run arrays in both stages and a small genetic search.
pub fn recovery_config(master_seed: u64) -> CalibrationConfig {
    let mut cfg = CalibrationConfig {
        master_seed,
        ..CalibrationConfig::default()
    };
    let sc = &mut cfg.scenario;
    sc.network = RoadNetwork::corridor(4, 500.0, 3, 80.0, 3);
    sc.entrance_inputs = sc.network.entrances.iter().map(|e| (e.id.clone(), 900.0)).collect();
    sc.subject_desired_speed_kmh = 50.0;
    sc.total_time = 1800.0;
    sc.warmup_time = 300.0;
    cfg.stage1.road_densities = true;
    cfg.stage2.parameters = default_stage2_candidates(&cfg.scenario)[..10].to_vec();
    cfg.stage2.levels = 2;
    cfg.stage2.k = 5;
    cfg.stage2.saga.population_size = 10;
    cfg.stage2.saga.max_generations = 10;
    cfg
}

/// The recovery scenario for one master seed. The true inputs are one of
/// the stage 1 array runs, picked by the seed.
pub fn recovery_case(master_seed: u64) -> Result<RecoveryCase> {
    let config = recovery_config(master_seed);
    let ids = config.stage1_parameters();
    let initial: Vec<(String, f64)> = ids
        .iter()
        .map(|id| Ok((id.clone(), config.scenario.get_param(id)?)))
        .collect::<Result<_>>()?;
    let space = build_parameter_space(&initial, config.stage1.delta)?;
    let oa = build_orthogonal_array(config.stage1.levels, space.len())?;
    let cases = map_levels_to_values(&oa, &space)?;
    let mut truth = cases[(master_seed.wrapping_mul(5).wrapping_add(6) % oa.runs as u64) as usize]
        .values
        .clone();
    for (id, factor) in PLANTED {
        truth.set(id, config.scenario.get_param(id)? * factor);
    }
    let level_step = space
        .entries
        .iter()
        .map(|p| (p.id.clone(), (p.upper - p.lower) / (config.stage1.levels - 1) as f64))
        .collect();
    let seed = derive_seed(master_seed, &[tag::REPLICATION, 0]);
    let field = generate_field_data(&config.scenario, &truth, seed)?;
    Ok(RecoveryCase {
        config,
        truth,
        planted: PLANTED.iter().map(|(id, _)| id.to_string()).collect(),
        level_step,
        field,
    })
}

/// How a calibration report fares against the recovery case's truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOutcome {
    /// Every stage 1 input within one grid step of the truth.
    pub inputs_recovered: bool,
    /// Every planted parameter in the critical set.
    pub planted_found: bool,
    pub final_accuracy: f64,
}

impl RecoveryOutcome {
    pub fn passed(&self, threshold: f64) -> bool {
        self.inputs_recovered && self.planted_found && self.final_accuracy >= threshold
    }
}

impl RecoveryCase {
    pub fn assess(&self, report: &CalibrationReport) -> RecoveryOutcome {
        let inputs_recovered = report.stage1.as_ref().is_some_and(|s1| {
            self.level_step.iter().all(|(id, step)| {
                match (s1.best.get(id), self.truth.get(id)) {
                    (Some(x), Some(t)) => (x - t).abs() <= step * (1.0 + 1e-9),
                    _ => false,
                }
            })
        });
        let planted_found = report
            .stage2
            .as_ref()
            .is_some_and(|s2| self.planted.iter().all(|p| s2.critical.contains(p)));
        RecoveryOutcome {
            inputs_recovered,
            planted_found,
            final_accuracy: report.stage2.as_ref().map_or(f64::NEG_INFINITY, |s| s.f_max),
        }
    }
}
