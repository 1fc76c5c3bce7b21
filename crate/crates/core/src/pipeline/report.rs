//! Human-readable rendering of a calibration report.

use std::fmt::Write as _;
use std::io::Write;

use super::stages::CalibrationReport;
use crate::{Error, Result};

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

pub fn render_report(r: &CalibrationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "calibration report (master seed {})", r.master_seed);
    if let Some(f) = &r.failure {
        let _ = writeln!(s, "FAILED: {f}");
    }
    let _ = writeln!(s, "\nfield measures");
    for e in &r.field_mops.entries {
        let _ = writeln!(s, "  {:<28} {:>12} {}", e.id.to_string(), fmt_opt(e.value), e.units);
    }
    if let Some(s1) = &r.stage1 {
        let _ = writeln!(
            s,
            "\nstage 1: {} of {} cases evaluated, best case {} with accuracy {:.4}",
            s1.cases.len(),
            s1.runs,
            s1.best_case,
            s1.a_max
        );
        for (id, v) in &s1.best.values {
            let _ = writeln!(s, "  {id:<36} {v:.4}");
        }
    }
    if let Some(s2) = &r.stage2 {
        let _ = writeln!(
            s,
            "\nstage 2: {} screening cases, {} generations, {} distinct individuals",
            s2.phase1_cases.len(),
            s2.history.len(),
            s2.saga_evaluations
        );
        let _ = writeln!(s, "  ranking (range):");
        for (id, &j) in s2.ranking.iter().zip(&s2.range_analysis.ranking) {
            let mark = if s2.critical.contains(id) { "*" } else { " " };
            let _ = writeln!(s, "  {mark} {id:<34} {:.4}", s2.range_analysis.ranges[j]);
        }
        let _ = writeln!(s, "  best accuracy {:.4}", s2.f_max);
        for (id, v) in &s2.best.values {
            let _ = writeln!(s, "  {id:<36} {v:.4}");
        }
    }
    if let Some(m) = &r.moe {
        let _ = writeln!(s, "\nevaluation errors (field vs calibrated)");
        for (name, v) in m.values() {
            let _ = writeln!(s, "  {name:<12} {}", fmt_opt(v));
        }
    }
    let d = &r.diagnostics;
    let _ = writeln!(
        s,
        "\n{} simulations, {} gridlocked cases, {} failed cases, {} collisions",
        d.simulations, d.gridlocked_cases, d.failed_cases, d.collisions
    );
    let t = &r.timings;
    let _ = writeln!(
        s,
        "time: field {:.1} s, stage 1 {:.1} s, stage 2 {:.1} s, evaluation {:.1} s",
        t.field_s, t.stage1_s, t.stage2_s, t.evaluation_s
    );
    s
}

/// Per-generation accuracy series of the genetic search, for plotting.
pub fn write_report_series<W: Write>(r: &CalibrationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "f_max_cur", "f_avg_cur", "best_so_far"])?;
    for g in r.stage2.iter().flat_map(|s| &s.history) {
        w.write_record([
            g.generation.to_string(),
            g.f_max_cur.to_string(),
            g.f_avg_cur.to_string(),
            g.best_so_far.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<series csv>", e))
}
