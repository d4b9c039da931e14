//! Adaptive cross-entropy search for the tilted rates.
//!
//! Each iteration simulates N cycles under the current tilt, raises the level
//! γ_t to the (1−ρ) sample quantile of per-cycle maximum class-k response
//! times, and refits the exponential rates in closed form: the weighted
//! maximum-likelihood estimate over the stopped cycle data, with weight
//! W_i = Σ_n L(E_n) 1{R_n > γ_t}.
//!
//! When no upper bound γ_max is known the search tests, after every
//! iteration, whether γ_t already exceeds the upper end of a pilot confidence
//! interval for Q_k(p), and adopts γ_t as γ_max the first time it does.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::CycleRecord;
use crate::error::{Error, Result};
use crate::estimate::{batch_ci, ClassCycle, QuantileReport};
use crate::measure::{SamplingPolicy, TiltedRates};
use crate::model::{ModelParams, SlaTarget};
use crate::rng::domain;
use crate::runner::Runner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CeConfig {
    /// N, cycles per iteration.
    pub cycles_per_iteration: usize,
    /// ρ, elite fraction.
    pub rho: f64,
    pub max_iterations: usize,
    /// Iterations without a level increase before giving up.
    pub stall_limit: usize,
    /// Optional update smoothing factor in (0, 1]; `None` applies the raw update.
    pub smoothing: Option<f64>,
    /// Cycles per heuristic pilot run (IS and naive each).
    pub pilot_cycles: usize,
    pub pilot_batches: usize,
    /// Extra CE updates after the heuristic fires, run at min(γ_t, pilot CI
    /// upper bound); that level then becomes γ_max.
    pub refine_iterations: usize,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            cycles_per_iteration: 10_000,
            rho: 0.1,
            max_iterations: 50,
            stall_limit: 5,
            smoothing: None,
            pilot_cycles: 10_000,
            pilot_batches: 20,
            refine_iterations: 2,
        }
    }
}

impl CeConfig {
    pub fn check(&self) -> Result<()> {
        if self.cycles_per_iteration == 0 {
            return Err(Error::Config("CE needs at least one cycle per iteration".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must be in (0,1), got {}", self.rho)));
        }
        if let Some(s) = self.smoothing {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Config(format!("smoothing must be in (0,1], got {s}")));
            }
        }
        if self.pilot_batches < 2 || self.pilot_cycles < self.pilot_batches {
            return Err(Error::Config("pilot needs >= 2 batches and at least one cycle per batch".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeIteration {
    pub t: usize,
    pub gamma: f64,
    /// Switching level used while sampling this iteration.
    pub switch_level: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Pilot CI upper bound, when the γ_max heuristic ran.
    pub pilot_ci_high: Option<f64>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeState {
    pub t: usize,
    pub gamma_t: f64,
    pub rates_t: TiltedRates,
    pub history: Vec<CeIteration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeOutcome {
    /// Final tilt with `gamma_max` set to the switching level for production.
    pub rates: TiltedRates,
    pub iterations: usize,
    /// Level at which the search stopped.
    pub adopted_level: f64,
    /// Switching level for the production run.
    pub gamma_max: f64,
    pub adopted_by_heuristic: bool,
    pub history: Vec<CeIteration>,
}

/// (1−ρ) sample quantile of `maxima`, using the order statistic at index
/// ⌈(1−ρ)N⌉ (1-based).
pub fn level_from_maxima(maxima: &mut [f64], rho: f64) -> Result<f64> {
    if maxima.is_empty() {
        return Err(Error::NoTargetJobs);
    }
    maxima.sort_by(f64::total_cmp);
    let n = maxima.len();
    let idx = ((1.0 - rho) * n as f64).ceil() as usize;
    Ok(maxima[idx.clamp(1, n) - 1])
}

/// γ_t from the per-cycle maximum class-k response times, capped at γ_max.
pub fn adaptive_level(cycles: &[CycleRecord], class: usize, rho: f64, gamma_max: Option<f64>) -> Result<f64> {
    if !cycles.iter().any(|c| c.alpha_k[class] > 0) {
        return Err(Error::NoTargetJobs);
    }
    let mut maxima: Vec<f64> = cycles.iter().map(|c| c.max_response(class)).collect();
    let level = level_from_maxima(&mut maxima, rho)?;
    Ok(gamma_max.map_or(level, |g| level.min(g)))
}

/// W_i = Σ_n L(E_n) 1{R_n > γ} over the class-k jobs of a cycle.
pub fn elite_weight(cycle: &CycleRecord, class: usize, gamma: f64) -> f64 {
    cycle
        .jobs
        .iter()
        .filter(|j| j.class == class && j.response_time > gamma)
        .map(|j| j.ll_at_enter_service.exp())
        .sum()
}

/// Weighted sufficient statistics of the stopped data.
#[derive(Debug, Clone, PartialEq)]
pub struct CeSums {
    pub total_weight: f64,
    pub arrivals: Vec<f64>,
    pub exposure: Vec<f64>,
    pub services: Vec<f64>,
    pub service_sum: Vec<f64>,
}

pub fn ce_sums(cycles: &[CycleRecord], class: usize, gamma: f64) -> Result<CeSums> {
    let k = cycles.first().map_or(0, |c| c.alpha_k.len());
    let mut sums = CeSums {
        total_weight: 0.0,
        arrivals: vec![0.0; k],
        exposure: vec![0.0; k],
        services: vec![0.0; k],
        service_sum: vec![0.0; k],
    };
    for c in cycles {
        let stopped = c
            .stopped
            .as_ref()
            .ok_or_else(|| Error::Domain("CE update needs cycles simulated under a tilted policy".into()))?;
        let w = elite_weight(c, class, gamma);
        if w == 0.0 {
            continue;
        }
        sums.total_weight += w;
        for l in 0..k {
            sums.arrivals[l] += w * stopped.arrivals[l] as f64;
            sums.exposure[l] += w * stopped.arrival_exposure(l);
            sums.services[l] += w * stopped.services[l] as f64;
            sums.service_sum[l] += w * stopped.service_sum[l];
        }
    }
    Ok(sums)
}

/// Closed-form CE rates at level γ. Classes whose elite data contain no
/// arrivals (or no service draws) keep the rate of `current`.
pub fn ce_update(cycles: &[CycleRecord], gamma: f64, current: &TiltedRates) -> Result<TiltedRates> {
    let class = current.target_class;
    let sums = ce_sums(cycles, class, gamma)?;
    if !(sums.total_weight > 0.0) || !sums.total_weight.is_finite() {
        return Err(Error::DegenerateElite { gamma });
    }
    let fit = |num: f64, den: f64, fallback: f64| -> Result<f64> {
        if num == 0.0 {
            return Ok(fallback);
        }
        let rate = num / den;
        if den > 0.0 && rate.is_finite() && rate > 0.0 {
            Ok(rate)
        } else {
            Err(Error::DegenerateElite { gamma })
        }
    };
    let lambda = (0..current.lambda.len())
        .map(|l| fit(sums.arrivals[l], sums.exposure[l], current.lambda[l]))
        .collect::<Result<Vec<_>>>()?;
    let mu = (0..current.mu.len())
        .map(|l| fit(sums.services[l], sums.service_sum[l], current.mu[l]))
        .collect::<Result<Vec<_>>>()?;
    TiltedRates::new(lambda, mu, class, current.gamma_max)
}

/// Sample CE objective: the elite-weighted log-likelihood of the stopped data
/// under candidate rates, up to terms that do not depend on them.
pub fn ce_objective(cycles: &[CycleRecord], class: usize, gamma: f64, lambda: &[f64], mu: &[f64]) -> Result<f64> {
    let sums = ce_sums(cycles, class, gamma)?;
    let mut obj = 0.0;
    for l in 0..lambda.len() {
        obj += sums.arrivals[l] * lambda[l].ln() - lambda[l] * sums.exposure[l];
        obj += sums.services[l] * mu[l].ln() - mu[l] * sums.service_sum[l];
    }
    Ok(obj / cycles.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeuristicDecision {
    Continue,
    Adopt(f64),
}

/// Adopts γ_t as γ_max once it strictly exceeds the pilot CI upper bound.
pub fn gamma_max_heuristic(gamma_t: f64, pilot: &QuantileReport) -> HeuristicDecision {
    if gamma_t > pilot.ci_high {
        HeuristicDecision::Adopt(gamma_t)
    } else {
        HeuristicDecision::Continue
    }
}

fn smooth(new: TiltedRates, old: &TiltedRates, s: Option<f64>) -> TiltedRates {
    match s {
        None => new,
        Some(s) => {
            let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(n, o)| s * n + (1.0 - s) * o).collect();
            TiltedRates {
                lambda: mix(&new.lambda, &old.lambda),
                mu: mix(&new.mu, &old.mu),
                ..new
            }
        }
    }
}

fn pilot_size(cfg: &CeConfig) -> usize {
    cfg.pilot_cycles.div_ceil(cfg.pilot_batches) * cfg.pilot_batches
}

/// Runs the adaptive CE search from the true rates.
///
/// Sampling switches back to the true rates at γ_max when it is known, and
/// at the previous level γ_{t−1} otherwise.
pub fn run_ce(params: &ModelParams, target: &SlaTarget, cfg: &CeConfig, runner: &Runner) -> Result<CeOutcome> {
    target.check(params)?;
    cfg.check()?;
    let class = target.class;
    let mut state = CeState {
        t: 0,
        gamma_t: 0.0,
        rates_t: TiltedRates::identity(params, class, f64::INFINITY),
        history: Vec::new(),
    };
    let mut stalled = 0;
    let mut pilot_naive: Option<Vec<ClassCycle>> = None;

    for t in 1..=cfg.max_iterations {
        let started = Instant::now();
        let switch_level = match target.gamma_max {
            Some(g) => g,
            None if t == 1 => f64::INFINITY,
            None => state.gamma_t,
        };
        let policy = SamplingPolicy::Switching(state.rates_t.clone().with_gamma_max(switch_level));
        let cycles = runner.cycles(params, &policy, domain::CE_BASE + t as u64, cfg.cycles_per_iteration)?;

        let mut gamma_t = adaptive_level(&cycles, class, cfg.rho, target.gamma_max)?;
        gamma_t = gamma_t.max(state.gamma_t);

        let updated = match ce_update(&cycles, gamma_t, &state.rates_t) {
            Err(Error::DegenerateElite { .. }) => {
                let mut maxima: Vec<f64> = cycles.iter().map(|c| c.max_response(class)).collect();
                let median = level_from_maxima(&mut maxima, 0.5)?;
                ce_update(&cycles, median, &state.rates_t)?
            }
            other => other?,
        };
        let rates = smooth(updated, &state.rates_t, cfg.smoothing);

        let mut decision = HeuristicDecision::Continue;
        let mut pilot_ci_high = None;
        match target.gamma_max {
            Some(g) => {
                if gamma_t >= g {
                    decision = HeuristicDecision::Adopt(g);
                }
            }
            None => {
                let m = pilot_size(cfg);
                if pilot_naive.is_none() {
                    pilot_naive = Some(runner.map_cycles(
                        params,
                        &SamplingPolicy::TrueMeasure,
                        domain::PILOT_NAIVE,
                        0..m as u64,
                        |c| ClassCycle::from_record(&c, class),
                    )?);
                }
                let pilot_policy = SamplingPolicy::Switching(rates.clone().with_gamma_max(gamma_t));
                let pilot_is = runner.map_cycles(
                    params,
                    &pilot_policy,
                    domain::HEURISTIC_BASE + t as u64,
                    0..m as u64,
                    |c| ClassCycle::from_record(&c, class),
                )?;
                let naive = pilot_naive.as_deref().unwrap_or_default();
                let report = batch_ci(&pilot_is, naive, target.p, cfg.pilot_batches)?;
                pilot_ci_high = Some(report.ci_high);
                decision = gamma_max_heuristic(gamma_t, &report);
            }
        }

        if gamma_t > state.gamma_t {
            stalled = 0;
        } else {
            stalled += 1;
        }
        state.t = t;
        state.gamma_t = gamma_t;
        state.rates_t = rates;
        state.history.push(CeIteration {
            t,
            gamma: gamma_t,
            switch_level,
            lambda: state.rates_t.lambda.clone(),
            mu: state.rates_t.mu.clone(),
            pilot_ci_high,
            elapsed_secs: started.elapsed().as_secs_f64(),
        });

        if let HeuristicDecision::Adopt(gamma_max) = decision {
            let mut gamma_max = gamma_max;
            if let Some(level) = pilot_ci_high.filter(|_| cfg.refine_iterations > 0) {
                gamma_max = level.min(gamma_max);
                refine(params, class, gamma_max, cfg, runner, &mut state)?;
            }
            return Ok(CeOutcome {
                rates: state.rates_t.clone().with_gamma_max(gamma_max),
                iterations: state.t,
                adopted_level: gamma_t,
                gamma_max,
                adopted_by_heuristic: target.gamma_max.is_none(),
                history: state.history,
            });
        }
        if stalled >= cfg.stall_limit {
            return Err(Error::NoProgress {
                gamma: gamma_t,
                iterations: stalled,
            });
        }
    }
    Err(Error::IterationCap(cfg.max_iterations))
}

/// CE updates at a fixed `level`, switching at the same level, continuing
/// from `state`.
fn refine(
    params: &ModelParams,
    class: usize,
    level: f64,
    cfg: &CeConfig,
    runner: &Runner,
    state: &mut CeState,
) -> Result<()> {
    for i in 0..cfg.refine_iterations {
        let started = Instant::now();
        let t = state.t + 1;
        let policy = SamplingPolicy::Switching(state.rates_t.clone().with_gamma_max(level));
        let cycles = runner.cycles(params, &policy, domain::CE_BASE + (1 << 12) + i as u64, cfg.cycles_per_iteration)?;
        let gamma = adaptive_level(&cycles, class, cfg.rho, Some(level))?;
        let updated = ce_update(&cycles, gamma, &state.rates_t)?;
        state.rates_t = smooth(updated, &state.rates_t, cfg.smoothing);
        state.t = t;
        state.history.push(CeIteration {
            t,
            gamma,
            switch_level: level,
            lambda: state.rates_t.lambda.clone(),
            mu: state.rates_t.mu.clone(),
            pilot_ci_high: None,
            elapsed_secs: started.elapsed().as_secs_f64(),
        });
    }
    Ok(())
}
