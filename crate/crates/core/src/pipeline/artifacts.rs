//! Run directory layout.
//!
//! | file | content |
//! |---|---|
//! | `config.toml` | the configuration the run started from |
//! | `stage1_cases.csv` | one row per stage 1 evaluation |
//! | `stage2_phase1_cases.csv` | one row per stage 2 screening evaluation |
//! | `range_analysis.json` | ranking, critical set and level means |
//! | `saga_history.json`, `saga_history.csv` | every generation of the genetic search |
//! | `report.json` | the calibration report |

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::CalibrationConfig;
use super::evaluate::EvalStatus;
use super::stages::CaseRecord;
use crate::saga::{GenerationRecord, ParameterSpace};
use crate::{Error, Result};

pub struct RunDirectory {
    path: PathBuf,
}

fn status_label(s: &EvalStatus) -> &str {
    match s {
        EvalStatus::Ok => "ok",
        EvalStatus::Gridlock => "gridlock",
        EvalStatus::Failed(_) => "failed",
    }
}

impl RunDirectory {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        Ok(RunDirectory { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<fs::File>> {
        let p = self.file(name);
        let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        Ok(csv::Writer::from_writer(f))
    }

    pub fn write_config(&self, cfg: &CalibrationConfig) -> Result<()> {
        let p = self.file("config.toml");
        fs::write(&p, cfg.to_toml()?).map_err(|e| Error::io(&p, e))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let p = self.file(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    }

    /// `case,<parameter ids>,accuracy,status`
    pub fn write_cases(&self, name: &str, space: &ParameterSpace, cases: &[CaseRecord]) -> Result<()> {
        let mut w = self.csv(name)?;
        let mut header = vec!["case".to_string()];
        header.extend(space.ids().into_iter().map(String::from));
        header.extend(["accuracy".into(), "status".into()]);
        w.write_record(&header)?;
        for c in cases {
            let mut row = vec![c.case_id.to_string()];
            row.extend(c.values.values.iter().map(|(_, v)| v.to_string()));
            row.push(c.evaluation.accuracy.to_string());
            row.push(status_label(&c.evaluation.status).to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(self.file(name), e))
    }

    /// JSON with the full records, plus a flat CSV with one row per
    /// individual.
    pub fn write_history(&self, history: &[GenerationRecord]) -> Result<()> {
        self.write_json("saga_history.json", history)?;
        let mut w = self.csv("saga_history.csv")?;
        let ids: Vec<&str> = history
            .first()
            .and_then(|g| g.population.first())
            .map(|c| c.values.iter().map(|(k, _)| k.as_str()).collect())
            .unwrap_or_default();
        let mut header = vec!["generation", "individual"];
        header.extend(&ids);
        header.extend(["accuracy", "f_max_cur", "f_avg_cur", "best_so_far"]);
        w.write_record(&header)?;
        for g in history {
            for (i, (c, a)) in g.population.iter().zip(&g.accuracies).enumerate() {
                let mut row = vec![g.generation.to_string(), i.to_string()];
                row.extend(c.values.iter().map(|(_, v)| v.to_string()));
                row.extend([a, &g.f_max_cur, &g.f_avg_cur, &g.best_so_far].map(|x| x.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io(self.file("saga_history.csv"), e))
    }
}
