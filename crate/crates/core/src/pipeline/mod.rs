//! Two-stage calibration: entrance inputs by orthogonal array testing
//! against traffic-level measures, then behaviour parameters by screening
//! and a genetic search against interaction measures.

mod artifacts;
mod config;
mod evaluate;
mod report;
mod stages;
pub mod synthetic;

pub use artifacts::RunDirectory;
pub use config::{default_stage2_candidates, CalibrationConfig, Stage1Config, Stage2Config};
pub use evaluate::{all_mops, simulate_dataset, EvalContext, EvalStatus, Evaluation, SimulatedData};
pub use report::{render_report, write_report_series};
pub use stages::{
    build_parameter_space, calibrate, calibrate_with, run_stage1, run_stage2, stage2_context, CalibrationReport,
    CaseRecord, Diagnostics, FieldSummary, Stage1Result, Stage2Result, Timings,
};
