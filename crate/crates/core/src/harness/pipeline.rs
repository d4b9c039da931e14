//! End-to-end estimation: the naive denominator run, the CE search, the
//! production IS run and the batched quantile interval, plus the naive and
//! static-tilt baselines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ce::{run_ce, CeConfig, CeOutcome};
use crate::engine::CycleRecord;
use crate::error::{Error, Result};
use crate::estimate::{batch_ci, tail_ci, ClassCycle, QuantileReport, TailReport};
use crate::measure::{SamplingPolicy, TiltedRates};
use crate::model::{ModelParams, SlaTarget};
use crate::rng::domain;
use crate::runner::Runner;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub denominator: f64,
    pub ce: f64,
    pub production: f64,
    pub validation: f64,
}

impl PhaseTimings {
    pub fn total(&self) -> f64 {
        self.denominator + self.ce + self.production + self.validation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Algorithm1,
    Naive,
    StaticTilt(String),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Algorithm1 => "alg1".into(),
            Method::Naive => "naive".into(),
            Method::StaticTilt(name) => name.clone(),
        }
    }
}

/// One quantile estimate and the run that produced it.
#[derive(Debug, Clone)]
pub struct Estimate {
    /// 0-based class.
    pub class: usize,
    pub method: Method,
    /// Cycles used by the estimator, excluding CE.
    pub cycles: usize,
    pub rates: Option<TiltedRates>,
    pub report: QuantileReport,
    /// Fraction of estimator cycles with a target-class job beyond Q̂.
    pub effective_fraction: f64,
    /// Fraction of IS cycles that switched back to the true rates.
    pub switched_fraction: f64,
    pub ce: Option<CeOutcome>,
    pub timings: PhaseTimings,
}

struct Summary {
    view: ClassCycle,
    switched: bool,
}

fn summarize(class: usize) -> impl Fn(CycleRecord) -> Summary + Sync + Send {
    move |c| Summary {
        switched: c.switched,
        view: ClassCycle::from_record(&c, class),
    }
}

fn effective(cycles: &[ClassCycle], q: f64) -> f64 {
    let hits = cycles.iter().filter(|c| c.entries.iter().any(|(r, _)| *r > q)).count();
    hits as f64 / cycles.len().max(1) as f64
}

/// Class-k views of `m` cycles under the true measure.
pub fn naive_cycles(params: &ModelParams, class: usize, m: usize, domain: u64, runner: &Runner) -> Result<Vec<ClassCycle>> {
    runner.map_cycles(params, &SamplingPolicy::TrueMeasure, domain, 0..m as u64, |c| {
        ClassCycle::from_record(&c, class)
    })
}

/// Production IS run under `rates` against a supplied denominator sample.
pub fn is_estimate(
    params: &ModelParams,
    class: usize,
    p: f64,
    rates: TiltedRates,
    denominator: &[ClassCycle],
    batches: usize,
    runner: &Runner,
    method: Method,
) -> Result<Estimate> {
    let started = Instant::now();
    let m1 = denominator.len();
    let policy = SamplingPolicy::Switching(rates.clone());
    let out = runner.map_cycles(params, &policy, domain::PRODUCTION, 0..m1 as u64, summarize(class))?;
    let switched = out.iter().filter(|s| s.switched).count();
    let views: Vec<ClassCycle> = out.into_iter().map(|s| s.view).collect();
    let report = batch_ci(&views, denominator, p, batches)?;
    Ok(Estimate {
        class,
        method,
        cycles: m1 + denominator.len(),
        rates: Some(rates),
        effective_fraction: effective(&views, report.q_hat),
        switched_fraction: switched as f64 / m1.max(1) as f64,
        report,
        ce: None,
        timings: PhaseTimings {
            production: started.elapsed().as_secs_f64(),
            ..Default::default()
        },
    })
}

/// The CE-tuned IS estimator for one target: m2 naive cycles, CE search,
/// m1 IS cycles.
pub fn algorithm1(
    params: &ModelParams,
    target: &SlaTarget,
    m1: usize,
    m2: usize,
    ce: &CeConfig,
    batches: usize,
    runner: &Runner,
) -> Result<Estimate> {
    target.check(params)?;
    if m1 != m2 {
        return Err(Error::Config(format!("m1 = {m1} must equal m2 = {m2}")));
    }
    let started = Instant::now();
    let denominator = naive_cycles(params, target.class, m2, domain::DENOMINATOR, runner)?;
    let t_den = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let outcome = run_ce(params, target, ce, runner)?;
    let t_ce = started.elapsed().as_secs_f64();

    let rates = outcome.rates.clone();
    let mut est = is_estimate(params, target.class, target.p, rates, &denominator, batches, runner, Method::Algorithm1)?;
    est.timings.denominator = t_den;
    est.timings.ce = t_ce;
    est.ce = Some(outcome);
    Ok(est)
}

/// Naive estimator on `m` cycles, used as both numerator and denominator.
pub fn naive_estimate(params: &ModelParams, class: usize, p: f64, m: usize, batches: usize, runner: &Runner) -> Result<Estimate> {
    let started = Instant::now();
    let views = naive_cycles(params, class, m, domain::NAIVE, runner)?;
    let report = batch_ci(&views, &views, p, batches)?;
    Ok(Estimate {
        class,
        method: Method::Naive,
        cycles: m,
        rates: None,
        effective_fraction: effective(&views, report.q_hat),
        switched_fraction: 0.0,
        report,
        ce: None,
        timings: PhaseTimings {
            production: started.elapsed().as_secs_f64(),
            ..Default::default()
        },
    })
}

/// Static-tilt estimator: the same two-run structure as `algorithm1` with
/// fixed rates in place of the CE search.
pub fn static_estimate(
    params: &ModelParams,
    target: &SlaTarget,
    rates: TiltedRates,
    m: usize,
    batches: usize,
    runner: &Runner,
    name: &str,
) -> Result<Estimate> {
    let started = Instant::now();
    let denominator = naive_cycles(params, target.class, m, domain::DENOMINATOR, runner)?;
    let t_den = started.elapsed().as_secs_f64();
    let mut est = is_estimate(
        params,
        target.class,
        target.p,
        rates,
        &denominator,
        batches,
        runner,
        Method::StaticTilt(name.to_string()),
    )?;
    est.timings.denominator = t_den;
    Ok(est)
}

/// Independent IS check of P(R > γ): fresh numerator and denominator runs.
pub fn validate_tail(
    params: &ModelParams,
    class: usize,
    rates: &TiltedRates,
    gamma: f64,
    m: usize,
    batches: usize,
    runner: &Runner,
) -> Result<TailReport> {
    let policy = SamplingPolicy::Switching(rates.clone());
    let is = runner.map_cycles(params, &policy, domain::VALIDATION, 0..m as u64, |c| {
        ClassCycle::from_record(&c, class)
    })?;
    let den = naive_cycles(params, class, m, domain::VALIDATION_DENOMINATOR, runner)?;
    tail_ci(&is, &den, gamma, batches)
}
