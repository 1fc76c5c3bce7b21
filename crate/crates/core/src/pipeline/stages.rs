//! The two calibration stages and the end-to-end driver.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::artifacts::RunDirectory;
use super::config::CalibrationConfig;
use super::evaluate::{all_mops, simulate_dataset, EvalContext, EvalStatus, Evaluation};
use crate::doe::{build_orthogonal_array, map_levels_to_values, range_analysis, RangeAnalysisResult, TestCase};
use crate::fielddata::{extract_events, preprocess, read_field_data, EventSet, FieldDataset, ParseOptions};
use crate::metrics::{evaluate_moes, MoeReport, MopId, MopVector};
use crate::roadsim::ScenarioConfig;
use crate::saga::{run_saga, GenerationRecord, ParameterBounds, ParameterCombination, ParameterSpace};
use crate::seed::{derive_seed, tag};
use crate::{Error, Result};

/// Bounds `[x0 - delta·|x0|, x0 + delta·|x0|]` for each initial value.
pub fn build_parameter_space(initial: &[(String, f64)], delta: f64) -> Result<ParameterSpace> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("scaling factor {delta} must lie in (0, 1)")));
    }
    let entries = initial
        .iter()
        .map(|(id, x0)| {
            if !x0.is_finite() {
                return Err(Error::Config(format!("initial value of {id} is not finite")));
            }
            if *x0 == 0.0 {
                return Err(Error::Degenerate(format!(
                    "{id} starts at 0, so relative bounds are empty; give explicit bounds"
                )));
            }
            let h = delta * x0.abs();
            Ok(ParameterBounds {
                id: id.clone(),
                lower: x0 - h,
                upper: x0 + h,
                initial: *x0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterSpace::new(entries)
}

/// Field data after preprocessing, with its events and MoPs.
#[derive(Debug, Clone)]
pub struct FieldSummary {
    pub dataset: FieldDataset,
    pub events: EventSet,
    pub mops: MopVector,
}

impl FieldSummary {
    pub fn new(dataset: FieldDataset, cfg: &CalibrationConfig) -> Result<Self> {
        let dataset = match &cfg.preprocess {
            Some(p) => preprocess(&dataset, p),
            None => dataset,
        };
        let events = extract_events(&dataset, &cfg.events);
        let mops = all_mops(&dataset, &events, &cfg.metric_config())?;
        Ok(FieldSummary { dataset, events, mops })
    }
}

/// One row of a case log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: usize,
    pub values: ParameterCombination,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub space: ParameterSpace,
    pub runs: usize,
    pub cases: Vec<CaseRecord>,
    pub best_case: usize,
    pub best: ParameterCombination,
    pub a_max: f64,
    pub simulations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Result {
    pub space: ParameterSpace,
    pub runs: usize,
    pub phase1_cases: Vec<CaseRecord>,
    pub range_analysis: RangeAnalysisResult,
    /// Parameter ids by decreasing range.
    pub ranking: Vec<String>,
    pub critical: Vec<String>,
    /// Best level of every candidate.
    pub phase1_best: ParameterCombination,
    pub history: Vec<GenerationRecord>,
    /// Every candidate: critical ones from the genetic search, the rest
    /// frozen at their Phase I best.
    pub best: ParameterCombination,
    #[serde(with = "crate::score")]
    pub f_max: f64,
    pub saga_evaluations: usize,
    /// Simulation runs in both phases.
    pub simulations: usize,
}

fn stage1_mops(cfg: &CalibrationConfig, field: &MopVector) -> Vec<MopId> {
    field
        .ids()
        .filter(|id| match id {
            MopId::AvgSubjectSpeed | MopId::AvgDensity => true,
            MopId::RoadDensity(_) => cfg.stage1.road_densities,
            _ => false,
        })
        .cloned()
        .collect()
}

fn initial_values(scenario: &ScenarioConfig, ids: &[String]) -> Result<Vec<(String, f64)>> {
    ids.iter().map(|id| Ok((id.clone(), scenario.get_param(id)?))).collect()
}

/// Evaluates `cases` in batches, stopping after the first batch in which
/// some case reaches `stop_at`.
fn evaluate_cases(ctx: &EvalContext, cases: &[TestCase], batch: usize, stop_at: f64) -> Vec<CaseRecord> {
    let mut out = Vec::new();
    for chunk in cases.chunks(batch) {
        let evals: Vec<Evaluation> = chunk.par_iter().map(|c| ctx.evaluate(&c.values)).collect();
        let mut stop = false;
        for (c, e) in chunk.iter().zip(evals) {
            info!(case = c.case_id, accuracy = e.accuracy, "case evaluated");
            stop |= e.accuracy >= stop_at;
            out.push(CaseRecord {
                case_id: c.case_id,
                values: c.values.clone(),
                evaluation: e,
            });
        }
        if stop {
            break;
        }
    }
    out
}

/// Best case by accuracy; the earliest wins ties.
fn best_case(cases: &[CaseRecord]) -> Option<&CaseRecord> {
    cases
        .iter()
        .filter(|c| c.evaluation.accuracy > f64::NEG_INFINITY)
        .fold(None, |best: Option<&CaseRecord>, c| match best {
            Some(b) if b.evaluation.accuracy >= c.evaluation.accuracy => Some(b),
            _ => Some(c),
        })
}

fn infeasible_summary(cases: &[CaseRecord]) -> String {
    let gridlocks = cases.iter().filter(|c| c.evaluation.status == EvalStatus::Gridlock).count();
    let failure = cases.iter().find_map(|c| match &c.evaluation.status {
        EvalStatus::Failed(m) => Some(m.as_str()),
        _ => None,
    });
    format!(
        "all {} cases infeasible ({gridlocks} gridlocked){}",
        cases.len(),
        failure.map(|m| format!("; first failure: {m}")).unwrap_or_default()
    )
}

/// Entrance inputs by orthogonal array testing: every array run is
/// simulated until one reaches the accuracy threshold, and the best run
/// is kept.
pub fn run_stage1(cfg: &CalibrationConfig, field: &FieldSummary) -> Result<Stage1Result> {
    let ids = cfg.stage1_parameters();
    let space = build_parameter_space(&initial_values(&cfg.scenario, &ids)?, cfg.stage1.delta)?;
    let oa = build_orthogonal_array(cfg.stage1.levels, space.len())?;
    let cases = map_levels_to_values(&oa, &space)?;
    let ctx = stage1_context(cfg, field)?;
    let records = evaluate_cases(&ctx, &cases, cfg.batch_size, cfg.stage1.accuracy_threshold);
    let best = best_case(&records).ok_or_else(|| Error::Stage(format!("stage 1: {}", infeasible_summary(&records))))?;
    info!(case = best.case_id, accuracy = best.evaluation.accuracy, "stage 1 done");
    Ok(Stage1Result {
        runs: oa.runs,
        best_case: best.case_id,
        best: best.values.clone(),
        a_max: best.evaluation.accuracy,
        simulations: ctx.simulations(),
        space,
        cases: records,
    })
}

pub(crate) fn stage1_context(cfg: &CalibrationConfig, field: &FieldSummary) -> Result<EvalContext> {
    EvalContext::new(
        cfg.scenario.clone(),
        &field.mops.select(&stage1_mops(cfg, &field.mops)),
        cfg.events,
        cfg.metric_config(),
        cfg.replications,
        cfg.master_seed,
    )
}

/// The scenario with the stage 1 optimum applied; stage 2 starts here.
pub fn stage2_context(cfg: &CalibrationConfig, field: &FieldSummary, stage1: &ParameterCombination) -> Result<EvalContext> {
    let mut scenario = cfg.scenario.clone();
    for (id, v) in &stage1.values {
        scenario.set_param(id, *v)?;
    }
    EvalContext::new(
        scenario,
        &field.mops.select(&cfg.stage2.mops),
        cfg.events,
        cfg.metric_config(),
        cfg.replications,
        cfg.master_seed,
    )
}

fn stage2_space(cfg: &CalibrationConfig, scenario: &ScenarioConfig) -> Result<ParameterSpace> {
    let ids = cfg.stage2_parameters();
    let relative: Vec<(String, f64)> = initial_values(scenario, &ids)?
        .into_iter()
        .filter(|(id, _)| !cfg.stage2.bounds.contains_key(id))
        .collect();
    let derived = build_parameter_space(&relative, cfg.stage2.delta)?;
    let entries = ids
        .iter()
        .map(|id| match cfg.stage2.bounds.get(id) {
            Some(&[lower, upper]) => Ok(ParameterBounds {
                id: id.clone(),
                lower,
                upper,
                initial: scenario.get_param(id)?.clamp(lower, upper),
            }),
            None => Ok(derived.get(id).expect("derived above").clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    ParameterSpace::new(entries)
}

/// Behaviour parameters. Phase I screens every candidate with an
/// orthogonal array and ranks them by range analysis; Phase II runs the
/// genetic search over the `k` most influential ones while the others stay
/// at their best Phase I level.
pub fn run_stage2(cfg: &CalibrationConfig, field: &FieldSummary, stage1: &Stage1Result) -> Result<Stage2Result> {
    let ctx = stage2_context(cfg, field, &stage1.best)?;
    run_stage2_in(cfg, &ctx)
}

pub(crate) fn run_stage2_in(cfg: &CalibrationConfig, ctx: &EvalContext) -> Result<Stage2Result> {
    let space = stage2_space(cfg, &ctx.scenario)?;
    let oa = build_orthogonal_array(cfg.stage2.levels, space.len())?;
    let cases = map_levels_to_values(&oa, &space)?;
    let records = evaluate_cases(ctx, &cases, cfg.batch_size, f64::INFINITY);

    let accuracies: Vec<f64> = records.iter().map(|c| c.evaluation.accuracy).collect();
    let worst = accuracies
        .iter()
        .filter(|a| a.is_finite())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !worst.is_finite() {
        return Err(Error::Stage(format!("stage 2 phase I: {}", infeasible_summary(&records))));
    }
    let filled: Vec<f64> = accuracies.iter().map(|&a| if a.is_finite() { a } else { worst }).collect();
    let ra = range_analysis(&oa, &filled, cfg.stage2.k)?;
    let name = |j: usize| space.entries[j].id.clone();
    let ranking: Vec<String> = ra.ranking.iter().map(|&j| name(j)).collect();
    let critical: Vec<String> = ra.critical_set.iter().map(|&j| name(j)).collect();
    let phase1_best = space.combination(
        space
            .entries
            .iter()
            .zip(&ra.best_levels)
            .map(|(p, &l)| crate::doe::level_value(p.lower, p.upper, l, oa.levels))
            .collect::<Result<Vec<_>>>()?,
    );
    info!(?critical, "stage 2 phase I done");

    let sub = space.restrict(&critical)?;
    let restrict = |c: &ParameterCombination| sub.combination(sub.vector(c).expect("same ids"));
    let seeds = [restrict(&phase1_best), sub.initial()];
    let mut saga_cfg = cfg.stage2.saga.clone();
    saga_cfg.seed = derive_seed(cfg.master_seed, &[tag::STAGE2]);
    let result = run_saga(
        |c| {
            let e = ctx.evaluate(&phase1_best.overlay(c));
            match e.status {
                EvalStatus::Ok => Ok(e.accuracy),
                EvalStatus::Gridlock => Err(Error::Infeasible("gridlock".into())),
                EvalStatus::Failed(m) => Err(Error::Infeasible(m)),
            }
        },
        &sub,
        &saga_cfg,
        &seeds,
    )?;
    info!(f_max = result.f_max, generations = result.history.len(), "stage 2 phase II done");
    Ok(Stage2Result {
        runs: oa.runs,
        phase1_cases: records,
        range_analysis: ra,
        ranking,
        critical,
        best: phase1_best.overlay(&result.best),
        phase1_best,
        history: result.history,
        f_max: result.f_max,
        saga_evaluations: result.evaluations,
        simulations: ctx.simulations(),
        space,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub field_s: f64,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub evaluation_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub simulations: usize,
    pub gridlocked_cases: usize,
    pub failed_cases: usize,
    pub collisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub master_seed: u64,
    pub field_mops: MopVector,
    pub stage1: Option<Stage1Result>,
    pub stage2: Option<Stage2Result>,
    /// Stage 1 inputs followed by stage 2 behaviour parameters.
    pub calibrated: ParameterCombination,
    /// MoPs of the calibrated scenario, first replication.
    pub calibrated_mops: Option<MopVector>,
    pub moe: Option<MoeReport>,
    pub diagnostics: Diagnostics,
    pub timings: Timings,
    /// Set when a stage failed; later stages are then absent.
    pub failure: Option<String>,
}

impl CalibrationReport {
    /// Accuracy of the final stage that completed.
    pub fn final_accuracy(&self) -> Option<f64> {
        self.stage2
            .as_ref()
            .map(|s| s.f_max)
            .or_else(|| self.stage1.as_ref().map(|s| s.a_max))
    }
}

/// Reads the configured field data and calibrates against it.
pub fn calibrate(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let path = cfg
        .field_data
        .as_ref()
        .ok_or_else(|| Error::Config("field_data is not set".into()))?;
    let dataset = read_field_data(path, &ParseOptions::default())?;
    calibrate_with(cfg, dataset)
}

/// Full two-stage calibration against `field`. Stage failures end the run
/// early but still produce a report; configuration and I/O problems are
/// errors.
pub fn calibrate_with(cfg: &CalibrationConfig, field: FieldDataset) -> Result<CalibrationReport> {
    cfg.validate()?;
    let run_dir = cfg.output_dir.as_deref().map(RunDirectory::create).transpose()?;
    if let Some(dir) = &run_dir {
        dir.write_config(cfg)?;
    }
    let mut timings = Timings::default();
    let t = Instant::now();
    let field = FieldSummary::new(field, cfg)?;
    timings.field_s = t.elapsed().as_secs_f64();

    let mut report = CalibrationReport {
        master_seed: cfg.master_seed,
        field_mops: field.mops.clone(),
        stage1: None,
        stage2: None,
        calibrated: ParameterCombination::default(),
        calibrated_mops: None,
        moe: None,
        diagnostics: Diagnostics::default(),
        timings,
        failure: None,
    };

    let t = Instant::now();
    let s1 = run_stage1(cfg, &field);
    report.timings.stage1_s = t.elapsed().as_secs_f64();
    let s1 = match s1 {
        Ok(s) => s,
        Err(e) => return finish(report, run_dir, Some(e)),
    };
    if let Some(dir) = &run_dir {
        dir.write_cases("stage1_cases.csv", &s1.space, &s1.cases)?;
    }
    report.calibrated = s1.best.clone();
    report.stage1 = Some(s1);

    let t = Instant::now();
    let s2 = stage2_context(cfg, &field, &report.calibrated).and_then(|ctx| run_stage2_in(cfg, &ctx));
    report.timings.stage2_s = t.elapsed().as_secs_f64();
    let s2 = match s2 {
        Ok(s) => s,
        Err(e) => return finish(report, run_dir, Some(e)),
    };
    if let Some(dir) = &run_dir {
        dir.write_cases("stage2_phase1_cases.csv", &s2.space, &s2.phase1_cases)?;
        dir.write_json("range_analysis.json", &(&s2.ranking, &s2.critical, &s2.range_analysis))?;
        dir.write_history(&s2.history)?;
    }
    report.calibrated = report.calibrated.overlay(&s2.best);
    report.stage2 = Some(s2);

    let t = Instant::now();
    match final_evaluation(cfg, &field, &report.calibrated) {
        Ok((mops, moe)) => {
            report.calibrated_mops = Some(mops);
            report.moe = Some(moe);
        }
        Err(e) => warn!(error = %e, "final evaluation failed"),
    }
    report.timings.evaluation_s = t.elapsed().as_secs_f64();
    finish(report, run_dir, None)
}

fn final_evaluation(
    cfg: &CalibrationConfig,
    field: &FieldSummary,
    calibrated: &ParameterCombination,
) -> Result<(MopVector, MoeReport)> {
    let mut sc = cfg.scenario.clone();
    for (id, v) in &calibrated.values {
        sc.set_param(id, *v)?;
    }
    sc.seed = derive_seed(cfg.master_seed, &[tag::REPLICATION, 0]);
    let sim = simulate_dataset(&sc)?;
    if sim.dataset.is_empty() {
        return Err(Error::MissingSubject);
    }
    let events = extract_events(&sim.dataset, &cfg.events);
    let metrics = cfg.metric_config();
    let mops = all_mops(&sim.dataset, &events, &metrics)?;
    let moe = evaluate_moes(
        (&field.dataset, &field.events),
        (&sim.dataset, &events),
        &cfg.cutin,
        &metrics,
    );
    Ok((mops, moe))
}

fn finish(mut report: CalibrationReport, dir: Option<RunDirectory>, failure: Option<Error>) -> Result<CalibrationReport> {
    let cases = report
        .stage1
        .iter()
        .flat_map(|s| &s.cases)
        .chain(report.stage2.iter().flat_map(|s| &s.phase1_cases));
    for c in cases {
        match c.evaluation.status {
            EvalStatus::Gridlock => report.diagnostics.gridlocked_cases += 1,
            EvalStatus::Failed(_) => report.diagnostics.failed_cases += 1,
            EvalStatus::Ok => {}
        }
        report.diagnostics.collisions += c.evaluation.collisions;
    }
    report.diagnostics.simulations = report.stage1.as_ref().map_or(0, |s| s.simulations)
        + report.stage2.as_ref().map_or(0, |s| s.simulations);
    if let Some(e) = failure {
        warn!(error = %e, "calibration stopped early");
        report.failure = Some(e.to_string());
    }
    if let Some(dir) = &dir {
        dir.write_json("report.json", &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadsim::RoadNetwork;

    fn bounds(x0: f64) -> (f64, f64) {
        let s = build_parameter_space(&[("p".into(), x0)], 0.2).unwrap();
        (s.entries[0].lower, s.entries[0].upper)
    }

    #[test]
    fn relative_bounds() {
        assert_eq!(bounds(800.0), (640.0, 960.0));
        assert_eq!(bounds(1200.0), (960.0, 1440.0));
        assert_eq!(bounds(-4.0), (-4.8, -3.2));
        assert!(matches!(
            build_parameter_space(&[("p".into(), 0.0)], 0.2),
            Err(Error::Degenerate(_))
        ));
        assert!(build_parameter_space(&[("p".into(), 1.0)], 1.0).is_err());
    }

    fn record(case_id: usize, accuracy: f64) -> CaseRecord {
        CaseRecord {
            case_id,
            values: ParameterCombination::default(),
            evaluation: Evaluation {
                accuracy,
                status: if accuracy.is_finite() { EvalStatus::Ok } else { EvalStatus::Gridlock },
                mops: MopVector::new(),
                collisions: 0,
            },
        }
    }

    #[test]
    fn best_case_prefers_earliest_and_skips_infeasible() {
        let cases = [record(1, f64::NEG_INFINITY), record(2, 0.5), record(3, 0.7), record(4, 0.7)];
        assert_eq!(best_case(&cases).unwrap().case_id, 3);
        assert!(best_case(&cases[..1]).is_none());
        assert!(infeasible_summary(&cases[..1]).contains("1 gridlocked"));
    }

    #[test]
    fn infeasible_accuracy_survives_json() {
        let r = record(1, f64::NEG_INFINITY);
        let text = serde_json::to_string(&r).unwrap();
        let back: CaseRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    fn small_config() -> CalibrationConfig {
        let mut cfg = CalibrationConfig::default();
        let sc = &mut cfg.scenario;
        sc.network = RoadNetwork::corridor(2, 400.0, 2, 80.0, 2);
        sc.entrance_inputs = sc.network.entrances.iter().map(|e| (e.id.clone(), 800.0)).collect();
        sc.total_time = 300.0;
        sc.warmup_time = 60.0;
        cfg.stage2.parameters = vec!["background.cf.T".into(), "background.cf.s0".into(), "subject.cf.a_max".into()];
        cfg.stage2.levels = 2;
        cfg.stage2.k = 2;
        cfg.stage2.saga.population_size = 4;
        cfg.stage2.saga.max_generations = 2;
        cfg
    }

    #[test]
    fn evaluation_is_deterministic_and_ignores_no_op_assignments() {
        let cfg = small_config();
        let field = FieldSummary::new(simulate_dataset(&cfg.scenario).unwrap().dataset, &cfg).unwrap();
        let ctx = stage1_context(&cfg, &field).unwrap();
        let mut c = ParameterCombination::default();
        c.set("input.E1", 700.0);
        let a = ctx.evaluate(&c);
        assert_eq!(a, ctx.evaluate(&c));
        // Restating a value the scenario already has is a no-op.
        let mut same = c.clone();
        same.set("input.E2", cfg.scenario.get_param("input.E2").unwrap());
        assert_eq!(ctx.evaluate(&same).accuracy, a.accuracy);
        assert_eq!(ctx.simulations(), 3);
    }

    #[test]
    fn calibration_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.output_dir = Some(dir.path().to_path_buf());
        let field = simulate_dataset(&cfg.scenario).unwrap().dataset;
        let report = calibrate_with(&cfg, field).unwrap();
        assert!(report.failure.is_none());
        for f in [
            "config.toml",
            "stage1_cases.csv",
            "stage2_phase1_cases.csv",
            "range_analysis.json",
            "saga_history.json",
            "saga_history.csv",
            "report.json",
        ] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: CalibrationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.calibrated, report.calibrated);
        let s1 = report.stage1.as_ref().unwrap();
        assert_eq!(report.calibrated.len(), s1.space.len() + 3);
        assert!(report.diagnostics.simulations >= s1.cases.len());
    }
}
