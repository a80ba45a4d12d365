use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Skipped checks are listed but do not affect the exit code.
    pub skipped: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

/// JSON summary written by every command, successful or not.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub command: String,
    pub version: &'static str,
    pub inputs: ExperimentConfig,
    pub metrics: BTreeMap<String, Value>,
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub passed: bool,
    pub wall_time_s: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunReport {
    pub fn new(command: &str, inputs: ExperimentConfig) -> Self {
        let experiment = if inputs.experiment.is_empty() {
            command.to_string()
        } else {
            inputs.experiment.clone()
        };
        Self {
            experiment,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            error: None,
            passed: false,
            wall_time_s: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metrics.insert(key.to_string(), v);
    }

    /// Record `value <= tolerance`.
    pub fn check_max(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed: value <= tolerance,
            skipped: false,
            value: Some(value),
            tolerance: Some(tolerance),
            detail: detail.into(),
        });
    }

    /// Record `value >= threshold`.
    pub fn check_min(&mut self, name: &str, value: f64, threshold: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed: value >= threshold,
            skipped: false,
            value: Some(value),
            tolerance: Some(threshold),
            detail: detail.into(),
        });
    }

    pub fn check_bool(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            skipped: false,
            value: None,
            tolerance: None,
            detail: detail.into(),
        });
    }

    pub fn skip(&mut self, name: &str, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed: true,
            skipped: true,
            value: None,
            tolerance: None,
            detail: detail.into(),
        });
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Set `passed` and the wall time, then write `<command>_report.json`.
    pub fn finish(&mut self, out: &Path) -> Result<PathBuf> {
        self.wall_time_s = self.started.map_or(0.0, |t| t.elapsed().as_secs_f64());
        self.passed = self.error.is_none() && self.checks.iter().all(|c| c.skipped || c.passed);
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(format!("{}_report.json", self.command.replace('-', "_")));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
