//! Experiment configuration, loaded from JSON (canonical) or TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ce::CeConfig;
use crate::error::{Error, Result};
use crate::engine::DEFAULT_MAX_EVENTS;
use crate::estimate::DEFAULT_BATCHES;
use crate::model::{ModelParams, SlaTarget};

/// One quantile target. `class` is 1-based, 1 being the highest priority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub class: usize,
    pub p: f64,
    #[serde(default)]
    pub gamma_max: Option<f64>,
    /// Known true quantile, used for MSE and coverage.
    #[serde(default)]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    Naive,
    StaticTilt {
        #[serde(default = "default_static_name")]
        name: String,
        lambda: Vec<f64>,
        mu: Vec<f64>,
        /// Switching level; falls back to the target's, then to the level
        /// chosen by the CE search in the same replication.
        #[serde(default)]
        gamma_max: Option<f64>,
    },
}

fn default_static_name() -> String {
    "static".into()
}

impl Baseline {
    pub fn name(&self) -> &str {
        match self {
            Baseline::Naive => "naive",
            Baseline::StaticTilt { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Long-delay threshold γ.
    pub level: f64,
    /// Target class, 1-based.
    pub class: usize,
    pub cycles: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            level: 0.0,
            class: 1,
            cycles: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlaConfig {
    pub target_relative_error: f64,
    pub pilot_cycles: usize,
    /// Upper bound on the sized production run.
    pub max_cycles: usize,
    /// Cycles for the independent validation run; defaults to m1.
    pub validation_cycles: Option<usize>,
}

impl Default for SlaConfig {
    fn default() -> Self {
        Self {
            target_relative_error: 0.001,
            pilot_cycles: 100_000,
            max_cycles: 10_000_000,
            validation_cycles: None,
        }
    }
}

fn default_m() -> usize {
    100_000
}
fn default_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}
fn default_batches() -> usize {
    DEFAULT_BATCHES
}
fn default_replications() -> usize {
    100
}
fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub targets: Vec<TargetSpec>,
    #[serde(default = "default_m")]
    pub m1: usize,
    #[serde(default = "default_m")]
    pub m2: usize,
    #[serde(default)]
    pub ce: CeConfig,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub sla: SlaConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Per-cycle event cap; a cycle that exceeds it aborts the run.
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text)?,
            _ => Self::from_json(&text)?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Config("no targets".into()));
        }
        for i in 0..self.targets.len() {
            self.target(i)?.check(&self.model)?;
        }
        self.ce.check()?;
        if self.batches < 2 {
            return Err(Error::Config(format!("batches must be >= 2, got {}", self.batches)));
        }
        if self.m1 < self.batches || self.m2 < self.batches {
            return Err(Error::Config("m1 and m2 must be at least the batch count".into()));
        }
        if self.m1 != self.m2 {
            return Err(Error::Config(format!(
                "batched intervals pair production and denominator cycles, so m1 must equal m2 (got {} and {})",
                self.m1, self.m2
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.max_events == 0 {
            return Err(Error::Config("max_events must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        let k = self.model.classes();
        for b in &self.baselines {
            if let Baseline::StaticTilt { lambda, mu, gamma_max, .. } = b {
                if lambda.len() != k || mu.len() != k {
                    return Err(Error::Config(format!("baseline {} needs {k} rates per side", b.name())));
                }
                if lambda.iter().chain(mu).any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(Error::Config(format!("baseline {} has a non-positive rate", b.name())));
                }
                if gamma_max.is_some_and(|g| !(g > 0.0)) {
                    return Err(Error::Config(format!("baseline {} has a non-positive gamma_max", b.name())));
                }
            }
        }
        if let Some(p) = &self.profile {
            if p.class == 0 || p.class > k {
                return Err(Error::Config(format!("profile class {} outside 1..={k}", p.class)));
            }
            if !(p.level >= 0.0 && p.level.is_finite()) || p.cycles == 0 {
                return Err(Error::Config("profile needs a finite level >= 0 and cycles >= 1".into()));
            }
        }
        if !(self.sla.target_relative_error > 0.0) {
            return Err(Error::Config("target_relative_error must be positive".into()));
        }
        Ok(())
    }

    /// The `i`-th target with a 0-based class index.
    pub fn target(&self, i: usize) -> Result<SlaTarget> {
        let t = &self.targets[i];
        if t.class == 0 || t.class > self.model.classes() {
            return Err(Error::Config(format!("target class {} outside 1..={}", t.class, self.model.classes())));
        }
        Ok(SlaTarget::new(t.class - 1, t.p, t.gamma_max))
    }

    pub fn sla_targets(&self) -> Result<Vec<SlaTarget>> {
        (0..self.targets.len()).map(|i| self.target(i)).collect()
    }

    /// Sets m1 = m2 = `m`.
    pub fn set_cycles(&mut self, m: usize) {
        self.m1 = m;
        self.m2 = m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CLASS: &str = r#"{
        "model": {"lambda": [0.1, 0.2], "mu": [1.0, 1.0]},
        "targets": [{"class": 1, "p": 0.999, "reference": 8.524}],
        "baselines": [{"kind": "naive"},
                      {"kind": "static_tilt", "name": "ldp", "lambda": [0.333, 0.5], "mu": [0.3, 0.3]}]
    }"#;

    #[test]
    fn json_defaults() {
        let c = ExperimentConfig::from_json(TWO_CLASS).unwrap();
        c.check().unwrap();
        assert_eq!(c.m1, 100_000);
        assert_eq!(c.batches, 30);
        assert_eq!(c.ce.cycles_per_iteration, 10_000);
        assert_eq!(c.target(0).unwrap().class, 0);
        assert_eq!(c.baselines[1].name(), "ldp");
    }

    #[test]
    fn toml_matches_json() {
        let toml_text = r#"
            m1 = 100000
            m2 = 100000
            [model]
            lambda = [0.1, 0.2]
            mu = [1.0, 1.0]
            [[targets]]
            class = 1
            p = 0.999
            reference = 8.524
            [[baselines]]
            kind = "naive"
            [[baselines]]
            kind = "static_tilt"
            name = "ldp"
            lambda = [0.333, 0.5]
            mu = [0.3, 0.3]
        "#;
        let a = ExperimentConfig::from_toml(toml_text).unwrap();
        let b = ExperimentConfig::from_json(TWO_CLASS).unwrap();
        assert_eq!(a, b);
        let round = ExperimentConfig::from_json(&b.to_json()).unwrap();
        assert_eq!(round, b);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::from_json(TWO_CLASS).unwrap();
        c.m2 = 50_000;
        assert!(c.check().is_err());
        let mut c = ExperimentConfig::from_json(TWO_CLASS).unwrap();
        c.targets[0].class = 3;
        assert!(c.check().is_err());
        let mut c = ExperimentConfig::from_json(TWO_CLASS).unwrap();
        c.set_cycles(29);
        assert!(c.check().is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"lambda": [0.6], "mu": [0.5]}, "targets": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"lambda": [0.1], "mu": [1]}, "targets": [], "typo": 1}"#).is_err());
    }
}
