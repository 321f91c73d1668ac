//! Flat `key = value` experiment configuration.
//!
//! Recognized keys and defaults:
//!
//! | key           | default             |
//! |---------------|---------------------|
//! | `grid.M`      | 64                  |
//! | `sqe.T`       | 1.0                 |
//! | `sqe.dt`      | 0.01                |
//! | `sqe.scheme`  | `exponential-euler` |
//! | `sqe.epsilon` | 0.25                |
//! | `wick.alpha`  | 1.0                 |
//! | `wick.N`      | 2                   |
//! | `wick.beta`   | 0.5                 |
//! | `cutoff.kind` | `sharp`             |
//! | `seed`        | 0                   |
//! | `replicas`    | per command         |
//!
//! Blank lines and lines starting with `#` are ignored. Later duplicates are
//! rejected. Values given on the command line override the file, which
//! overrides the defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::Scheme;
use crate::error::{Error, Result};
use crate::spectral::TorusGrid;
use crate::wick::{CutoffProfile, WickParams};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "grid.M")]
    pub modes: usize,
    #[serde(rename = "sqe.T")]
    pub horizon: f64,
    #[serde(rename = "sqe.dt")]
    pub dt: f64,
    #[serde(rename = "sqe.scheme")]
    pub scheme: Scheme,
    #[serde(rename = "sqe.epsilon")]
    pub epsilon: f64,
    #[serde(rename = "wick.alpha")]
    pub alpha: f64,
    #[serde(rename = "wick.N")]
    pub level: u32,
    #[serde(rename = "wick.beta")]
    pub beta: f64,
    #[serde(rename = "cutoff.kind")]
    pub cutoff: String,
    pub seed: u64,
    pub replicas: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            modes: 64,
            horizon: 1.0,
            dt: 0.01,
            scheme: Scheme::ExponentialEuler,
            epsilon: 0.25,
            alpha: 1.0,
            level: 2,
            beta: 0.5,
            cutoff: "sharp".into(),
            seed: 0,
            replicas: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 11] = [
        "grid.M",
        "sqe.T",
        "sqe.dt",
        "sqe.scheme",
        "sqe.epsilon",
        "wick.alpha",
        "wick.N",
        "wick.beta",
        "cutoff.kind",
        "seed",
        "replicas",
    ];

    /// Parses the flat format on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "grid.M" => self.modes = parse_value(key, value)?,
            "sqe.T" => self.horizon = parse_value(key, value)?,
            "sqe.dt" => self.dt = parse_value(key, value)?,
            "sqe.scheme" => {
                self.scheme = value
                    .parse()
                    .map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "sqe.epsilon" => self.epsilon = parse_value(key, value)?,
            "wick.alpha" => self.alpha = parse_value(key, value)?,
            "wick.N" => self.level = parse_value(key, value)?,
            "wick.beta" => self.beta = parse_value(key, value)?,
            "cutoff.kind" => {
                self.profile_for(value)?;
                self.cutoff = value.to_string();
            }
            "seed" => self.seed = parse_value(key, value)?,
            "replicas" => self.replicas = Some(parse_value(key, value)?),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn profile_for(&self, kind: &str) -> Result<CutoffProfile> {
        kind.parse().map_err(|e: Error| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running: grid, profile,
    /// charge, regularity, resolved level and time step.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let psi = self.profile()?;
        WickParams::new(self.alpha, self.level, self.beta, &psi, &grid)
            .map_err(|e| Error::Config(e.to_string()))?;
        crate::random::uniform_times(self.horizon, self.dt).map_err(|e| Error::Config(format!("sqe.T/sqe.dt: {e}")))?;
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("sqe.epsilon must be > 0".into()));
        }
        if self.replicas == Some(0) {
            return Err(Error::Config("replicas must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.modes).map_err(|e| Error::Config(format!("grid.M: {e}")))
    }

    pub fn profile(&self) -> Result<CutoffProfile> {
        self.profile_for(&self.cutoff)
    }

    pub fn params(&self) -> Result<WickParams> {
        WickParams::new(self.alpha, self.level, self.beta, &self.profile()?, &self.grid()?)
    }

    pub fn replicas_or(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    /// The resolved configuration in the flat format, keys in a fixed order.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("grid.M", self.modes.to_string()),
            ("sqe.T", self.horizon.to_string()),
            ("sqe.dt", self.dt.to_string()),
            ("sqe.scheme", self.scheme.name().to_string()),
            ("sqe.epsilon", self.epsilon.to_string()),
            ("wick.alpha", self.alpha.to_string()),
            ("wick.N", self.level.to_string()),
            ("wick.beta", self.beta.to_string()),
            ("cutoff.kind", self.cutoff.clone()),
            ("seed", self.seed.to_string()),
        ];
        if let Some(r) = self.replicas {
            v.push(("replicas", r.to_string()));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_all_keys() {
        let text = "# comment\n grid.M = 32\nsqe.T=0.5\nsqe.dt = 0.05\nsqe.scheme = semi-implicit\n\
                    wick.alpha = 1.5\nwick.N = 1\ncutoff.kind = smooth\nseed = 9\nreplicas = 7\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.modes, 32);
        assert_eq!(c.scheme, Scheme::SemiImplicit);
        assert_eq!(c.cutoff, "smooth");
        assert_eq!(c.seed, 9);
        assert_eq!(c.replicas, Some(7));
    }

    #[test]
    fn flat_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("wick.alpha", "0.75").unwrap();
        c.set("replicas", "12").unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_flat()).unwrap(), c);
    }

    #[test]
    fn errors_are_config_errors() {
        for bad in [
            "nonsense",
            "grid.M = 12",
            "grid.M = x",
            "colour = red",
            "wick.alpha = 4",
            "cutoff.kind = boxcar",
            "sqe.T = 1\nsqe.T = 2",
            "sqe.dt = 0.3",
            "grid.M = 16\nwick.N = 4",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
