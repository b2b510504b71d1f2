use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::schemes::{SchemeConfig, StepDiagnostics, Termination};

pub const RECORD_FORMAT: &str = "otflow-run-record/1";

/// Everything needed to audit or re-evaluate one (method, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format: String,
    pub method: String,
    pub seed: u64,
    pub generator: String,
    pub theta_init: Vec<f64>,
    pub theta_final: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub termination: Termination,
    pub final_mmd: f64,
    pub final_map_error: Option<f64>,
    pub wall_time_seconds: f64,
    pub scheme: SchemeConfig,
    pub experiment: ExperimentConfig,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if rec.format != RECORD_FORMAT {
            return Err(Error::Parse(format!("unsupported record format {:?}", rec.format)));
        }
        Ok(rec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
