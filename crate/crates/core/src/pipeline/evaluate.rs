//! Turning a parameter assignment into an accuracy.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::fielddata::{extract_events, DataSource, EventConfig, EventSet, FieldDataset};
use crate::metrics::{accuracy, compute_traffic_mops, compute_vehicle_mops, MetricConfig, MopId, MopVector};
use crate::roadsim::{run_scenario_with, Detector, FrameFilter, RunSummary, ScenarioConfig};
use crate::saga::ParameterCombination;
use crate::seed::{derive_seed, tag};
use crate::{Error, Result};

/// One simulation run seen through the virtual detector.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: FieldDataset,
    pub summary: RunSummary,
}

/// Runs `scenario` and collects the post-warm-up detection records.
pub fn simulate_dataset(scenario: &ScenarioConfig) -> Result<SimulatedData> {
    let mut det = Detector::new(scenario)?;
    let mut records = Vec::new();
    let (summary, _) = run_scenario_with(scenario, FrameFilter::PostWarmup, |f| {
        if let Some(r) = det.observe(f) {
            records.push(r);
        }
    })?;
    Ok(SimulatedData {
        dataset: FieldDataset::new(records, DataSource::Simulation),
        summary,
    })
}

/// Every MoP the pipeline knows about, for one dataset.
pub fn all_mops(d: &FieldDataset, events: &EventSet, metrics: &MetricConfig) -> Result<MopVector> {
    let mut v = compute_traffic_mops(d, metrics)?;
    v.merge(&compute_vehicle_mops(events));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Gridlock,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `-inf` unless `status` is `Ok`.
    #[serde(with = "crate::score")]
    pub accuracy: f64,
    pub status: EvalStatus,
    /// Simulated MoPs averaged over replications, restricted to the
    /// stage's measures.
    pub mops: MopVector,
    pub collisions: u64,
}

/// Everything needed to score an assignment: the scenario it is applied
/// to, the field MoPs it is scored against and the seed policy.
pub struct EvalContext {
    pub scenario: ScenarioConfig,
    /// Field MoPs for the stage; only these are compared.
    pub field: MopVector,
    pub events: EventConfig,
    pub metrics: MetricConfig,
    pub replications: usize,
    pub master_seed: u64,
    simulations: AtomicUsize,
}

impl EvalContext {
    /// Drops field MoPs that are missing or zero, since relative errors
    /// against them are undefined.
    pub fn new(
        scenario: ScenarioConfig,
        field: &MopVector,
        events: EventConfig,
        metrics: MetricConfig,
        replications: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let mut kept = MopVector::new();
        for e in &field.entries {
            match e.value {
                Some(x) if x != 0.0 => kept.set(e.id.clone(), Some(x)),
                Some(_) => warn!(measure = %e.id, "field value is zero; measure dropped from the objective"),
                None => warn!(measure = %e.id, "measure not observed in field data; dropped from the objective"),
            }
        }
        if kept.entries.is_empty() {
            return Err(Error::Degenerate("no usable field measures for this stage".into()));
        }
        Ok(EvalContext {
            scenario,
            field: kept,
            events,
            metrics,
            replications,
            master_seed,
            simulations: AtomicUsize::new(0),
        })
    }

    /// Simulation runs started through this context so far.
    pub fn simulations(&self) -> usize {
        self.simulations.load(Ordering::Relaxed)
    }

    /// Seed of replication `r`. The same seeds serve every evaluation, so
    /// two assignments are compared under identical demand noise.
    pub fn replication_seed(&self, r: usize) -> u64 {
        derive_seed(self.master_seed, &[tag::REPLICATION, r as u64])
    }

    /// The context scenario with `values` applied.
    pub fn configure(&self, values: &ParameterCombination) -> Result<ScenarioConfig> {
        let mut sc = self.scenario.clone();
        for (id, v) in &values.values {
            sc.set_param(id, *v)?;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn evaluate(&self, values: &ParameterCombination) -> Evaluation {
        match self.try_evaluate(values) {
            Ok(e) => e,
            Err(e) => {
                warn!(error = %e, "evaluation failed");
                Evaluation {
                    accuracy: f64::NEG_INFINITY,
                    status: EvalStatus::Failed(e.to_string()),
                    mops: MopVector::new(),
                    collisions: 0,
                }
            }
        }
    }

    fn try_evaluate(&self, values: &ParameterCombination) -> Result<Evaluation> {
        let base = self.configure(values)?;
        let ids: Vec<MopId> = self.field.ids().cloned().collect();
        let mut per_run = Vec::with_capacity(self.replications);
        let mut collisions = 0;
        for r in 0..self.replications {
            let mut sc = base.clone();
            sc.seed = self.replication_seed(r);
            self.simulations.fetch_add(1, Ordering::Relaxed);
            let sim = simulate_dataset(&sc)?;
            collisions += sim.summary.collisions;
            if sim.summary.is_gridlock() {
                debug!(replication = r, "gridlock");
                return Ok(Evaluation {
                    accuracy: f64::NEG_INFINITY,
                    status: EvalStatus::Gridlock,
                    mops: MopVector::new(),
                    collisions,
                });
            }
            if sim.dataset.is_empty() {
                return Err(Error::MissingSubject);
            }
            let events = extract_events(&sim.dataset, &self.events);
            per_run.push(all_mops(&sim.dataset, &events, &self.metrics)?.select(&ids));
        }
        let mops = MopVector::mean(&per_run);
        Ok(Evaluation {
            accuracy: accuracy(&self.field, &mops)?,
            status: EvalStatus::Ok,
            mops,
            collisions,
        })
    }
}
