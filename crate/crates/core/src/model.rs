//! Queueing model parameters and analytic reference values.
//!
//! Classes are stored 0-based: index 0 is the highest priority. Config files,
//! CLI flags and reports use 1-based class numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arrival and service rates of a non-preemptive K-class priority queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.lambda, raw.mu)
    }
}

impl ModelParams {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        validate(&lambda, &mu)?;
        Ok(Self { lambda, mu })
    }

    pub fn classes(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Total offered load, the sum of λ_k/μ_k.
    pub fn load(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l / m).sum()
    }

    /// The parameters restricted to a single class, as an M/M/1 model.
    pub fn single_class(&self, class: usize) -> Result<Self> {
        if class >= self.classes() {
            return Err(Error::Domain(format!("class index {class} out of range")));
        }
        Self::new(vec![self.lambda[class]], vec![self.mu[class]])
    }
}

/// Checks rate positivity and the stability condition Σ λ_k/μ_k < 1.
pub fn validate(lambda: &[f64], mu: &[f64]) -> Result<()> {
    if lambda.is_empty() || lambda.len() != mu.len() {
        return Err(Error::ClassCount {
            lambda: lambda.len(),
            mu: mu.len(),
        });
    }
    for (class, &value) in lambda.iter().chain(mu).enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveRate {
                class: class % lambda.len(),
                value,
            });
        }
    }
    let load: f64 = lambda.iter().zip(mu).map(|(l, m)| l / m).sum();
    if load >= 1.0 {
        return Err(Error::Unstable { load });
    }
    Ok(())
}

/// A service-level target: estimate the `p`-quantile of class `class`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaTarget {
    /// 0-based class index.
    pub class: usize,
    pub p: f64,
    /// Known upper bound on the quantile, or `None` to search for one.
    pub gamma_max: Option<f64>,
}

impl SlaTarget {
    pub fn new(class: usize, p: f64, gamma_max: Option<f64>) -> Self {
        Self {
            class,
            p,
            gamma_max,
        }
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.class >= params.classes() {
            return Err(Error::Config(format!(
                "target class {} outside 1..={}",
                self.class + 1,
                params.classes()
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("p must be in (0,1), got {}", self.p)));
        }
        if let Some(g) = self.gamma_max {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gamma_max must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Steady-state sojourn-time quantile of an M/M/1 queue, −ln(1−p)/(μ−λ).
pub fn mm1_sojourn_quantile(lambda: f64, mu: f64, p: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < mu && mu.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < lambda < mu, got lambda={lambda}, mu={mu}"
        )));
    }
    if !(p >= 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must be in [0,1), got {p}")));
    }
    Ok(-(-p).ln_1p() / (mu - lambda))
}

/// Steady-state tail P(R > γ) of the M/M/1 sojourn time.
pub fn mm1_sojourn_tail(lambda: f64, mu: f64, gamma: f64) -> f64 {
    (-(mu - lambda) * gamma.max(0.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        assert!(ModelParams::new(vec![0.1, 0.2], vec![1.0, 1.0]).is_ok());
        assert!(ModelParams::new(vec![0.2, 0.4], vec![2.0, 1.0]).is_ok());
        assert!(matches!(
            ModelParams::new(vec![1.0], vec![1.0]),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            ModelParams::new(vec![0.1, 0.0], vec![1.0, 1.0]),
            Err(Error::NonPositiveRate { class: 1, .. })
        ));
        assert!(matches!(
            ModelParams::new(vec![0.1], vec![-1.0]),
            Err(Error::NonPositiveRate { class: 0, .. })
        ));
        assert!(matches!(
            ModelParams::new(vec![], vec![]),
            Err(Error::ClassCount { .. })
        ));
    }

    #[test]
    fn mm1_closed_form() {
        let q = mm1_sojourn_quantile(0.5, 1.0, 0.999).unwrap();
        assert!((q - 13.815510557964274).abs() < 1e-12);
        let q = mm1_sojourn_quantile(0.1, 1.0, 0.99999).unwrap();
        assert!((q - 12.792139405522477).abs() < 1e-9);
        assert_eq!(mm1_sojourn_quantile(0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!(mm1_sojourn_quantile(0.5, 1.0, 1e-300).unwrap() < 1e-290);
        assert!(mm1_sojourn_quantile(1.0, 1.0, 0.5).is_err());
        assert!(mm1_sojourn_quantile(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn target_checks() {
        let params = ModelParams::new(vec![0.1, 0.2], vec![1.0, 1.0]).unwrap();
        assert!(SlaTarget::new(1, 0.999, None).check(&params).is_ok());
        assert!(SlaTarget::new(2, 0.999, None).check(&params).is_err());
        assert!(SlaTarget::new(0, 1.0, None).check(&params).is_err());
        assert!(SlaTarget::new(0, 0.9, Some(0.0)).check(&params).is_err());
    }

    #[test]
    fn params_deserialize_validates() {
        let ok: ModelParams = serde_json::from_str(r#"{"lambda":[0.5],"mu":[1.0]}"#).unwrap();
        assert_eq!(ok.classes(), 1);
        assert!(serde_json::from_str::<ModelParams>(r#"{"lambda":[2.0],"mu":[1.0]}"#).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantile_monotone(lambda in 0.01f64..0.9, dl in 0.001f64..0.05, p in 0.01f64..0.98, dp in 0.001f64..0.01) {
                let mu = 1.0;
                let q = mm1_sojourn_quantile(lambda, mu, p).unwrap();
                prop_assert!(mm1_sojourn_quantile(lambda, mu, p + dp).unwrap() > q);
                if lambda + dl < mu {
                    prop_assert!(mm1_sojourn_quantile(lambda + dl, mu, p).unwrap() > q);
                }
                prop_assert!(mm1_sojourn_quantile(lambda, mu + 0.1, p).unwrap() < q);
            }

            #[test]
            fn validate_iff_stable(rates in proptest::collection::vec((0.01f64..2.0, 0.1f64..5.0), 1..6)) {
                let (lambda, mu): (Vec<f64>, Vec<f64>) = rates.into_iter().unzip();
                let load: f64 = lambda.iter().zip(&mu).map(|(l, m)| l / m).sum();
                prop_assert_eq!(validate(&lambda, &mu).is_ok(), load < 1.0);
            }
        }
    }
}
