//! The switching change of measure.
//!
//! Until the stopping time τ_k every inter-arrival and service time is drawn
//! from the tilted exponentials; from τ_k on, draws revert to the true rates
//! and the likelihood ratio is frozen. All likelihood arithmetic is in log
//! space.
//!
//! Which service draws belong to the likelihood is fixed by the filtration:
//! for classes `l <= k` the service time is drawn when the job arrives, for
//! classes `l > k` when it enters service. [`Measure::attaches_at_arrival`]
//! encodes that rule and the engine follows it.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Tilted rates for a switching importance-sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedRates {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// 0-based target class k.
    pub target_class: usize,
    /// Switching level; `f64::INFINITY` disables switching.
    pub gamma_max: f64,
}

impl TiltedRates {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>, target_class: usize, gamma_max: f64) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != mu.len() {
            return Err(Error::ClassCount {
                lambda: lambda.len(),
                mu: mu.len(),
            });
        }
        for (class, &value) in lambda.iter().chain(&mu).enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRate {
                    class: class % lambda.len(),
                    value,
                });
            }
        }
        if target_class >= lambda.len() {
            return Err(Error::Domain(format!("target class {target_class} out of range")));
        }
        if gamma_max.is_nan() || gamma_max < 0.0 {
            return Err(Error::Domain(format!("switching level must be >= 0, got {gamma_max}")));
        }
        Ok(Self {
            lambda,
            mu,
            target_class,
            gamma_max,
        })
    }

    /// The identity tilt: tilted rates equal the true ones.
    pub fn identity(params: &ModelParams, target_class: usize, gamma_max: f64) -> Self {
        Self {
            lambda: params.lambda().to_vec(),
            mu: params.mu().to_vec(),
            target_class,
            gamma_max,
        }
    }

    pub fn with_gamma_max(mut self, gamma_max: f64) -> Self {
        self.gamma_max = gamma_max;
        self
    }

    fn check_against(&self, params: &ModelParams) -> Result<()> {
        if self.lambda.len() != params.classes() {
            return Err(Error::Domain(format!(
                "tilt has {} classes, model has {}",
                self.lambda.len(),
                params.classes()
            )));
        }
        Ok(())
    }
}

/// How a cycle draws its random primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPolicy {
    /// Naive simulation under the true rates. The likelihood is identically 1.
    TrueMeasure,
    /// Tilted rates until τ_k, true rates afterwards.
    Switching(TiltedRates),
}

impl SamplingPolicy {
    pub fn target_class(&self) -> Option<usize> {
        match self {
            SamplingPolicy::TrueMeasure => None,
            SamplingPolicy::Switching(t) => Some(t.target_class),
        }
    }
}

/// Log density ratio log f(x)/f̃(x) of Exp(rate) against Exp(tilted).
#[inline]
pub fn exp_log_ratio(rate: f64, tilted: f64, x: f64) -> f64 {
    (rate / tilted).ln() + (tilted - rate) * x
}

/// Σ_l log G^A_l(H_l) − log G̃^A_l(H_l) for exponential inter-arrivals.
pub fn residual_age_correction(lambda: &[f64], lambda_tilde: &[f64], ages: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(lambda_tilde)
        .zip(ages)
        .map(|((l, lt), h)| (lt - l) * h)
        .sum()
}

/// Data of a cycle observed up to τ_k ∧ α, as consumed by the CE update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedStats {
    /// τ_k ∧ α.
    pub time: f64,
    /// N^A_l(τ_k ∧ α).
    pub arrivals: Vec<u64>,
    /// Σ_n A_{l,n} over the completed inter-arrivals.
    pub interarrival_sum: Vec<f64>,
    /// H^A_l at τ_k ∧ α.
    pub age: Vec<f64>,
    /// Number of service draws in the likelihood: N^A_l for l <= k, N^S_l for l > k.
    pub services: Vec<u64>,
    /// Sum of those service draws.
    pub service_sum: Vec<f64>,
}

impl StoppedStats {
    /// Σ A_{l,n} + H^A_l, the arrival exposure of class l.
    pub fn arrival_exposure(&self, class: usize) -> f64 {
        self.interarrival_sum[class] + self.age[class]
    }
}

/// Running log-likelihood of one cycle.
#[derive(Debug, Clone)]
pub struct LikelihoodTracker {
    arrival_terms: f64,
    service_terms: f64,
    arrivals: Vec<u64>,
    interarrival_sum: Vec<f64>,
    services: Vec<u64>,
    service_sum: Vec<f64>,
    frozen: Option<f64>,
}

impl LikelihoodTracker {
    fn new(classes: usize) -> Self {
        Self {
            arrival_terms: 0.0,
            service_terms: 0.0,
            arrivals: vec![0; classes],
            interarrival_sum: vec![0.0; classes],
            services: vec![0; classes],
            service_sum: vec![0.0; classes],
            frozen: None,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn frozen_value(&self) -> Option<f64> {
        self.frozen
    }
}

/// Per-cycle sampling state: the policy, whether τ_k has happened, and the
/// likelihood bookkeeping.
#[derive(Debug, Clone)]
pub struct Measure<'a> {
    params: &'a ModelParams,
    tilt: Option<&'a TiltedRates>,
    switched_at: Option<f64>,
    tracker: LikelihoodTracker,
    stopped: Option<StoppedStats>,
}

impl<'a> Measure<'a> {
    pub fn new(params: &'a ModelParams, policy: &'a SamplingPolicy) -> Result<Self> {
        let tilt = match policy {
            SamplingPolicy::TrueMeasure => None,
            SamplingPolicy::Switching(t) => {
                t.check_against(params)?;
                Some(t)
            }
        };
        Ok(Self {
            params,
            tilt,
            switched_at: None,
            tracker: LikelihoodTracker::new(params.classes()),
            stopped: None,
        })
    }

    /// True while draws come from the tilted densities.
    #[inline]
    pub fn is_tilting(&self) -> bool {
        self.tilt.is_some() && self.switched_at.is_none()
    }

    pub fn switched_at(&self) -> Option<f64> {
        self.switched_at
    }

    pub fn target_class(&self) -> Option<usize> {
        self.tilt.map(|t| t.target_class)
    }

    pub fn tracker(&self) -> &LikelihoodTracker {
        &self.tracker
    }

    /// Whether class `l` has its service time drawn at arrival.
    #[inline]
    pub fn attaches_at_arrival(&self, class: usize) -> bool {
        match self.tilt {
            Some(t) => class <= t.target_class,
            None => true,
        }
    }

    #[inline]
    fn arrival_rate(&self, class: usize) -> f64 {
        match self.tilt {
            Some(t) if self.switched_at.is_none() => t.lambda[class],
            _ => self.params.lambda()[class],
        }
    }

    #[inline]
    fn service_rate(&self, class: usize) -> f64 {
        match self.tilt {
            Some(t) if self.switched_at.is_none() => t.mu[class],
            _ => self.params.mu()[class],
        }
    }

    /// Draws the next class-`l` inter-arrival time under the current density.
    #[inline]
    pub fn draw_interarrival<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.arrival_rate(class)
    }

    /// Draws a class-`l` service time under the current density and, while
    /// tilting, adds its log-ratio term to the likelihood.
    #[inline]
    pub fn draw_service<R: Rng + ?Sized>(&mut self, class: usize, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        let s = e / self.service_rate(class);
        if let (Some(t), None) = (self.tilt, self.switched_at) {
            self.tracker.service_terms += exp_log_ratio(self.params.mu()[class], t.mu[class], s);
            self.tracker.services[class] += 1;
            self.tracker.service_sum[class] += s;
        }
        s
    }

    /// Records a completed class-`l` inter-arrival of length `interarrival`.
    #[inline]
    pub fn record_arrival(&mut self, class: usize, interarrival: f64) {
        if let (Some(t), None) = (self.tilt, self.switched_at) {
            self.tracker.arrival_terms +=
                exp_log_ratio(self.params.lambda()[class], t.lambda[class], interarrival);
            self.tracker.arrivals[class] += 1;
            self.tracker.interarrival_sum[class] += interarrival;
        }
    }

    fn ages(now: f64, last_arrival: &[f64]) -> impl Iterator<Item = f64> + '_ {
        last_arrival.iter().map(move |&a| now - a)
    }

    /// log L(t) for a time `t` at or after the last recorded event.
    pub fn log_likelihood_at(&self, now: f64, last_arrival: &[f64]) -> f64 {
        if let Some(v) = self.tracker.frozen {
            return v;
        }
        match self.tilt {
            None => 0.0,
            Some(t) => {
                let age: f64 = self
                    .params
                    .lambda()
                    .iter()
                    .zip(&t.lambda)
                    .zip(Self::ages(now, last_arrival))
                    .map(|((l, lt), h)| (lt - l) * h)
                    .sum();
                self.tracker.arrival_terms + self.tracker.service_terms + age
            }
        }
    }

    /// log L(E) for a job entering service at `now`.
    #[inline]
    pub fn likelihood_at_enter_service(&self, now: f64, last_arrival: &[f64]) -> f64 {
        self.log_likelihood_at(now, last_arrival)
    }

    /// The switching rule, evaluated at a class-k arrival with its lower
    /// bound `r_prime`. Returns true if the measure switched here.
    pub fn on_arrival_check_switch(&mut self, r_prime: f64, now: f64, last_arrival: &[f64]) -> bool {
        match self.tilt {
            Some(t) if self.switched_at.is_none() && r_prime > t.gamma_max => {
                self.stop(now, last_arrival);
                self.switched_at = Some(now);
                true
            }
            _ => false,
        }
    }

    /// Freezes the likelihood at `now` (τ_k, or α when the cycle ends
    /// without switching) and snapshots the stopped statistics.
    pub fn stop(&mut self, now: f64, last_arrival: &[f64]) {
        if self.tracker.frozen.is_some() || self.tilt.is_none() {
            return;
        }
        let value = self.log_likelihood_at(now, last_arrival);
        self.tracker.frozen = Some(value);
        self.stopped = Some(StoppedStats {
            time: now,
            arrivals: self.tracker.arrivals.clone(),
            interarrival_sum: self.tracker.interarrival_sum.clone(),
            age: Self::ages(now, last_arrival).collect(),
            services: self.tracker.services.clone(),
            service_sum: self.tracker.service_sum.clone(),
        });
    }

    pub fn into_stopped(self) -> Option<StoppedStats> {
        self.stopped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_class() -> ModelParams {
        ModelParams::new(vec![0.1, 0.2], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn log_ratio_hand_values() {
        let a = 1.7;
        let term = exp_log_ratio(0.1, 0.33, a);
        // log(0.1 e^{-0.1a}) - log(0.33 e^{-0.33a})
        let direct = (0.1f64 * (-0.1 * a).exp()).ln() - (0.33f64 * (-0.33 * a).exp()).ln();
        assert!((term - direct).abs() < 1e-12);
        assert!((term - ((0.1f64 / 0.33).ln() + 0.23 * a)).abs() < 1e-12);
        assert_eq!(exp_log_ratio(0.4, 0.4, 123.0), 0.0);
    }

    #[test]
    fn age_correction_examples() {
        assert_eq!(residual_age_correction(&[0.1, 0.2], &[0.33, 0.5], &[0.0, 0.0]), 0.0);
        let c = residual_age_correction(&[0.1], &[0.33], &[2.0]);
        let direct = (-0.1f64 * 2.0).exp().ln() - (-0.33f64 * 2.0).exp().ln();
        assert!((c - 0.46).abs() < 1e-12);
        assert!((c - direct).abs() < 1e-12);
        assert_eq!(residual_age_correction(&[0.1, 0.2], &[0.1, 0.2], &[5.0, 7.0]), 0.0);
    }

    #[test]
    fn identity_tilt_contributes_nothing() {
        let params = two_class();
        let policy = SamplingPolicy::Switching(TiltedRates::identity(&params, 0, f64::INFINITY));
        let mut m = Measure::new(&params, &policy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = m.draw_interarrival(1, &mut rng);
            m.record_arrival(1, a);
            m.draw_service(0, &mut rng);
        }
        assert_eq!(m.log_likelihood_at(40.0, &[3.0, 1.0]).to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn single_job_hand_example() {
        // One class-1 arrival after a and its service s; class 2 idle for the whole time.
        let params = two_class();
        let tilt = TiltedRates::new(vec![0.33, 0.224], vec![0.234, 0.238], 0, f64::INFINITY).unwrap();
        let policy = SamplingPolicy::Switching(tilt);
        let mut m = Measure::new(&params, &policy).unwrap();
        let (a, s) = (1.3, 0.8);
        m.record_arrival(0, a);
        m.tracker.service_terms += exp_log_ratio(1.0, 0.234, s);
        let now = a;
        let got = m.log_likelihood_at(now, &[a, 0.0]);
        let expect = (0.1f64.ln() - 0.33f64.ln() + (0.33 - 0.1) * a)
            + (1.0f64.ln() - 0.234f64.ln() + (0.234 - 1.0) * s)
            + (0.224 - 0.2) * now;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn switching_freezes() {
        let params = two_class();
        let tilt = TiltedRates::new(vec![0.33, 0.224], vec![0.234, 0.238], 0, 5.0).unwrap();
        let policy = SamplingPolicy::Switching(tilt);
        let mut m = Measure::new(&params, &policy).unwrap();
        m.record_arrival(0, 2.0);
        assert!(!m.on_arrival_check_switch(4.0, 2.0, &[2.0, 0.0]));
        assert!(m.is_tilting());
        assert!(m.on_arrival_check_switch(6.0, 2.0, &[2.0, 0.0]));
        assert!(!m.is_tilting());
        let frozen = m.tracker().frozen_value().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        m.draw_service(0, &mut rng);
        m.record_arrival(1, 9.0);
        assert_eq!(m.log_likelihood_at(100.0, &[50.0, 9.0]), frozen);
        let stopped = m.into_stopped().unwrap();
        assert_eq!(stopped.time, 2.0);
        assert_eq!(stopped.arrivals, vec![1, 0]);
        assert_eq!(stopped.arrival_exposure(1), 2.0);
    }

    #[test]
    fn zero_level_switches_immediately_and_infinite_never() {
        let params = two_class();
        let zero = SamplingPolicy::Switching(TiltedRates::identity(&params, 0, 0.0));
        let mut m = Measure::new(&params, &zero).unwrap();
        assert!(m.on_arrival_check_switch(1e-9, 0.5, &[0.5, 0.0]));
        let inf = SamplingPolicy::Switching(TiltedRates::identity(&params, 0, f64::INFINITY));
        let mut m = Measure::new(&params, &inf).unwrap();
        assert!(!m.on_arrival_check_switch(1e300, 0.5, &[0.5, 0.0]));
    }

    #[test]
    fn post_switch_draws_use_true_rates() {
        let params = two_class();
        let tilt = TiltedRates::new(vec![5.0, 5.0], vec![0.01, 0.01], 0, 0.0).unwrap();
        let policy = SamplingPolicy::Switching(tilt);
        let mut m = Measure::new(&params, &policy).unwrap();
        m.on_arrival_check_switch(1.0, 0.0, &[0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mean: f64 = (0..20_000).map(|_| m.draw_service(0, &mut rng)).sum::<f64>() / 20_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn tilted_rates_reject_bad_input() {
        assert!(TiltedRates::new(vec![0.1], vec![0.0], 0, 1.0).is_err());
        assert!(TiltedRates::new(vec![0.1], vec![1.0], 1, 1.0).is_err());
        assert!(TiltedRates::new(vec![0.1], vec![1.0], 0, f64::NAN).is_err());
    }
}
