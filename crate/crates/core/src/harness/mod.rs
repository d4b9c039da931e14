//! Configuration, experiment orchestration and reporting.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

pub use commands::{benchmark, blocking_profile, ce_search, estimate, sla8, validate, CommandOutput};
pub use config::{Baseline, ExperimentConfig, TargetSpec};
pub use report::{Cell, Format, Table};

use crate::error::{Error, Result};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cycles: Option<usize>,
    /// 1-based class.
    pub class: Option<usize>,
    pub p: Option<f64>,
    /// `Some(None)` means "auto".
    pub gamma_max: Option<Option<f64>>,
    pub batches: Option<usize>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.cycles {
            cfg.set_cycles(m);
            if let Some(p) = cfg.profile.as_mut() {
                p.cycles = m;
            }
        }
        if let Some(k) = self.class {
            let kept: Vec<TargetSpec> = cfg.targets.iter().filter(|t| t.class == k).cloned().collect();
            cfg.targets = if kept.is_empty() {
                let p = self.p.or(cfg.targets.first().map(|t| t.p)).unwrap_or(0.999);
                vec![TargetSpec {
                    class: k,
                    p,
                    gamma_max: None,
                    reference: None,
                }]
            } else {
                kept
            };
            if let Some(profile) = cfg.profile.as_mut() {
                profile.class = k;
            }
        }
        if let Some(p) = self.p {
            for t in &mut cfg.targets {
                if t.p != p {
                    t.reference = None;
                }
                t.p = p;
            }
            let mut seen = Vec::new();
            cfg.targets.retain(|t| {
                let fresh = !seen.contains(&(t.class, t.p.to_bits()));
                seen.push((t.class, t.p.to_bits()));
                fresh
            });
        }
        if let Some(g) = self.gamma_max {
            for t in &mut cfg.targets {
                t.gamma_max = g;
            }
        }
        if let Some(r) = self.batches {
            cfg.batches = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.check()
    }
}

/// Parses a `--gamma-max` value: a positive number or `auto`.
pub fn parse_gamma_max(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(Some(g)),
        _ => Err(Error::Config(format!("--gamma-max expects a positive number or 'auto', got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"model": {"lambda": [0.1, 0.2], "mu": [1, 1]},
                "targets": [{"class": 1, "p": 0.999, "reference": 8.524}, {"class": 2, "p": 0.999}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn class_filter_and_p() {
        let mut c = cfg();
        Overrides {
            class: Some(2),
            p: Some(0.99),
            cycles: Some(3000),
            gamma_max: Some(Some(12.0)),
            ..Default::default()
        }
        .apply(&mut c)
        .unwrap();
        assert_eq!(c.targets.len(), 1);
        assert_eq!(c.targets[0].class, 2);
        assert_eq!(c.targets[0].p, 0.99);
        assert_eq!(c.targets[0].gamma_max, Some(12.0));
        assert_eq!((c.m1, c.m2), (3000, 3000));
    }

    #[test]
    fn changing_p_drops_reference() {
        let mut c = cfg();
        Overrides {
            p: Some(0.99),
            ..Default::default()
        }
        .apply(&mut c)
        .unwrap();
        assert_eq!(c.targets[0].reference, None);
        assert_eq!(c.targets.len(), 2);
        let mut c = cfg();
        c.targets[1].class = 1;
        Overrides {
            p: Some(0.99),
            ..Default::default()
        }
        .apply(&mut c)
        .unwrap();
        assert_eq!(c.targets.len(), 1);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        let mut c = cfg();
        let e = Overrides {
            class: Some(5),
            ..Default::default()
        }
        .apply(&mut c)
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(parse_gamma_max("auto").unwrap().is_none());
        assert_eq!(parse_gamma_max("8.5").unwrap(), Some(8.5));
        assert!(parse_gamma_max("-1").is_err());
    }
}
