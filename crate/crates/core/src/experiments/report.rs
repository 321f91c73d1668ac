use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::error::Result;

pub const REPORT_SCHEMA: &str = "sqlab-report/1";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of one checked property.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionResult {
    pub fn new(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value <= threshold, value, threshold, detail)
    }

    /// `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(name, value >= threshold, value, threshold, detail)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: value={:.6e} threshold={:.6e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            self.detail
        )
    }
}

/// Which stream purposes a command used, keyed by name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedLayout {
    pub seed: u64,
    pub purposes: Vec<(String, u32)>,
    /// Replica `i` always reads stream id `i`.
    pub replicas: usize,
}

/// Deterministic part of a report. Serializing it twice for the same config
/// and seed gives identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBody {
    pub schema: &'static str,
    pub code_version: &'static str,
    pub command: String,
    pub config: Vec<(&'static str, String)>,
    pub seeds: SeedLayout,
    pub criteria: Vec<CriterionResult>,
    pub estimates: Value,
    pub replicas: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub body: ReportBody,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(command: &str, config: &ExperimentConfig, seeds: SeedLayout) -> Self {
        Self {
            body: ReportBody {
                schema: REPORT_SCHEMA,
                code_version: CODE_VERSION,
                command: command.to_string(),
                config: config.entries(),
                seeds,
                criteria: Vec::new(),
                estimates: Value::Null,
                replicas: Value::Null,
            },
            wall_clock_seconds: 0.0,
        }
    }

    pub fn push(&mut self, c: CriterionResult) {
        self.body.criteria.push(c);
    }

    pub fn passed(&self) -> bool {
        self.body.criteria.iter().all(|c| c.passed)
    }

    pub fn criteria(&self) -> &[CriterionResult] {
        &self.body.criteria
    }

    pub fn body_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.body)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
