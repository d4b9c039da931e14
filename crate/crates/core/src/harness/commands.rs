//! The experiments behind each CLI subcommand.

use std::time::Instant;

use crate::ce::{run_ce, CeOutcome};
use crate::engine::EngineOptions;
use crate::error::{Error, Result};
use crate::estimate::{required_cycles, TailReport};
use crate::measure::{SamplingPolicy, TiltedRates};
use crate::model::{mm1_sojourn_quantile, mm1_sojourn_tail, ModelParams, SlaTarget};
use crate::rng::{derive_seed, domain};
use crate::runner::Runner;

use super::config::{Baseline, ExperimentConfig};
use super::pipeline::{algorithm1, naive_estimate, static_estimate, validate_tail, Estimate, PhaseTimings};
use super::report::{class_headers, Cell, Table};

/// Result tables of one command. `timings` holds wall-clock data and is kept
/// apart so that the main tables are reproducible byte for byte.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub tables: Vec<(String, Table)>,
    pub timings: Table,
}

pub fn runner_for(cfg: &ExperimentConfig) -> Result<Runner> {
    Ok(Runner::new(cfg.seed, cfg.workers)?.with_options(EngineOptions {
        max_events: cfg.max_events,
    }))
}

/// Reference quantile: configured, else the M/M/1 closed form when K = 1.
pub fn reference_quantile(cfg: &ExperimentConfig, i: usize) -> Option<f64> {
    let t = &cfg.targets[i];
    t.reference.or_else(|| {
        (cfg.model.classes() == 1).then(|| mm1_sojourn_quantile(cfg.model.lambda()[0], cfg.model.mu()[0], t.p).ok())?
    })
}

fn with_context(e: Error, what: &str) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{what}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
        Error::Unresolvable(m) => Error::Unresolvable(format!("{what}: {m}")),
        other => other,
    }
}

fn static_rates(params: &ModelParams, b: &Baseline, target: &SlaTarget, fallback: f64) -> Result<Option<TiltedRates>> {
    match b {
        Baseline::Naive => Ok(None),
        Baseline::StaticTilt { lambda, mu, gamma_max, .. } => {
            let g = gamma_max.or(target.gamma_max).unwrap_or(fallback);
            let r = TiltedRates::new(lambda.clone(), mu.clone(), target.class, g)?;
            if r.lambda.len() != params.classes() {
                return Err(Error::Config(format!("baseline {} has the wrong class count", b.name())));
            }
            Ok(Some(r))
        }
    }
}

/// Runs the CE-tuned IS estimator and then each baseline for one target.
fn estimate_target(cfg: &ExperimentConfig, i: usize, runner: &Runner, seeds: [u64; 2]) -> Result<Vec<Estimate>> {
    let target = cfg.target(i)?;
    let ctx = format!("class {}", target.class + 1);
    let alg = algorithm1(&cfg.model, &target, cfg.m1, cfg.m2, &cfg.ce, cfg.batches, runner)
        .map_err(|e| with_context(e, &ctx))?;
    let fallback = alg.ce.as_ref().map_or(f64::INFINITY, |c| c.gamma_max);
    let mut out = vec![alg];
    for (j, b) in cfg.baselines.iter().enumerate() {
        let r = runner.reseeded(derive_seed(seeds[0], seeds[1] + j as u64 + 1));
        let est = match static_rates(&cfg.model, b, &target, fallback)? {
            None => naive_estimate(&cfg.model, target.class, target.p, cfg.m1 + cfg.m2, cfg.batches, &r),
            Some(rates) => static_estimate(&cfg.model, &target, rates, cfg.m1, cfg.batches, &r, b.name()),
        }
        .map_err(|e| with_context(e, &format!("{ctx}, {}", b.name())))?;
        out.push(est);
    }
    Ok(out)
}

fn estimate_headers(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["class", "method", "p", "cycles"].iter().map(|s| s.to_string()).collect();
    h.extend(class_headers("lambda", k));
    h.extend(class_headers("mu", k));
    h.extend(
        [
            "gamma_max",
            "q_hat",
            "ci_low",
            "ci_high",
            "relative_error",
            "beta",
            "censored",
            "effective_fraction",
            "switched_fraction",
            "ce_iterations",
            "reference",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn estimate_row(e: &Estimate, k: usize, reference: Option<f64>) -> Vec<Cell> {
    let mut row: Vec<Cell> = vec![
        (e.class + 1).into(),
        e.method.label().into(),
        e.report.p.into(),
        e.cycles.into(),
    ];
    match &e.rates {
        Some(r) => {
            row.extend(r.lambda.iter().map(|&v| Cell::from(v)));
            row.extend(r.mu.iter().map(|&v| Cell::from(v)));
        }
        None => row.extend(std::iter::repeat_n(Cell::Missing, 2 * k)),
    }
    row.push(e.rates.as_ref().map(|r| r.gamma_max).into());
    let q = &e.report;
    if q.censored {
        row.extend([Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing]);
    } else {
        row.extend([q.q_hat.into(), q.ci_low.into(), q.ci_high.into(), q.relative_error.into()]);
    }
    row.push(q.beta.into());
    row.push(q.censored.into());
    row.push(e.effective_fraction.into());
    row.push(e.switched_fraction.into());
    row.push(e.ce.as_ref().map(|c| c.iterations).into());
    row.push(reference.into());
    row
}

fn timing_table() -> Table {
    Table::new(
        "wall-clock seconds",
        &["class", "method", "denominator", "ce", "production", "validation", "total"],
    )
}

fn timing_row(class: usize, method: &str, t: &PhaseTimings) -> Vec<Cell> {
    vec![
        (class + 1).into(),
        method.into(),
        t.denominator.into(),
        t.ce.into(),
        t.production.into(),
        t.validation.into(),
        t.total().into(),
    ]
}

/// The CE-tuned IS estimator (and configured baselines) once per target.
pub fn estimate(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let runner = runner_for(cfg)?;
    let k = cfg.model.classes();
    let headers = estimate_headers(k);
    let mut table = Table::new("quantile estimates", &headers.iter().map(String::as_str).collect::<Vec<_>>());
    let mut timings = timing_table();
    for i in 0..cfg.targets.len() {
        let reference = reference_quantile(cfg, i);
        for e in estimate_target(cfg, i, &runner, [cfg.seed, 0])? {
            table.push(estimate_row(&e, k, reference));
            timings.push(timing_row(e.class, &e.method.label(), &e.timings));
        }
    }
    Ok(CommandOutput {
        tables: vec![("estimate".into(), table)],
        timings,
    })
}

/// One replication's estimate of one method.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub target: usize,
    pub replication: usize,
    pub estimate: Estimate,
}

/// Per-method summary over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    /// 0-based class.
    pub class: usize,
    pub method: String,
    pub p: f64,
    pub cycles: usize,
    pub replications: usize,
    /// Replications whose estimate is censored (no samples beyond the level).
    pub censored: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub mse: Option<f64>,
    pub coverage: Option<usize>,
    pub reference: Option<f64>,
    pub mean_seconds: f64,
}

pub fn summarize(reps: &[Replicate], reference: Option<f64>) -> MethodSummary {
    let first = &reps[0].estimate;
    let ok: Vec<&Estimate> = reps.iter().map(|r| &r.estimate).filter(|e| !e.report.censored).collect();
    let n = ok.len() as f64;
    let mean = (!ok.is_empty()).then(|| ok.iter().map(|e| e.report.q_hat).sum::<f64>() / n);
    let variance = mean
        .filter(|_| ok.len() > 1)
        .map(|m| ok.iter().map(|e| (e.report.q_hat - m).powi(2)).sum::<f64>() / (n - 1.0));
    let mse = reference
        .filter(|_| !ok.is_empty())
        .map(|q| ok.iter().map(|e| (e.report.q_hat - q).powi(2)).sum::<f64>() / n);
    let coverage = reference.map(|q| ok.iter().filter(|e| e.report.covers(q)).count());
    MethodSummary {
        class: first.class,
        method: first.method.label(),
        p: first.report.p,
        cycles: first.cycles,
        replications: reps.len(),
        censored: reps.len() - ok.len(),
        mean,
        variance,
        mse,
        coverage,
        reference,
        mean_seconds: reps.iter().map(|r| r.estimate.timings.total()).sum::<f64>() / reps.len() as f64,
    }
}

/// Replication study returning raw estimates, grouped per target and method.
pub fn replicate(cfg: &ExperimentConfig, replications: usize) -> Result<Vec<Vec<Vec<Replicate>>>> {
    let base = runner_for(cfg)?;
    let mut per_target = Vec::new();
    for i in 0..cfg.targets.len() {
        let mut methods: Vec<Vec<Replicate>> = vec![Vec::new(); 1 + cfg.baselines.len()];
        for rep in 0..replications {
            let seed = derive_seed(cfg.seed, rep as u64);
            let runner = base.reseeded(seed);
            for (j, e) in estimate_target(cfg, i, &runner, [seed, 0])?.into_iter().enumerate() {
                methods[j].push(Replicate {
                    target: i,
                    replication: rep,
                    estimate: e,
                });
            }
        }
        per_target.push(methods);
    }
    Ok(per_target)
}

/// Replicated comparison of the CE-tuned IS estimator with the configured baselines.
pub fn benchmark(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let k = cfg.model.classes();
    let study = replicate(cfg, cfg.replications)?;
    let mut summary = Table::new(
        "benchmark",
        &[
            "class",
            "method",
            "p",
            "cycles",
            "replications",
            "censored",
            "mean",
            "variance",
            "mse",
            "coverage",
            "reference",
        ],
    );
    let headers = estimate_headers(k);
    let mut hdr: Vec<&str> = vec!["replication"];
    hdr.extend(headers.iter().map(String::as_str));
    let mut detail = Table::new("replications", &hdr);
    let mut timings = Table::new("mean wall-clock seconds per replication", &["class", "method", "seconds"]);
    for (i, methods) in study.iter().enumerate() {
        let reference = reference_quantile(cfg, i);
        for reps in methods {
            let s = summarize(reps, reference);
            summary.push(vec![
                (s.class + 1).into(),
                s.method.clone().into(),
                s.p.into(),
                s.cycles.into(),
                s.replications.into(),
                s.censored.into(),
                s.mean.into(),
                s.variance.into(),
                s.mse.into(),
                s.coverage.into(),
                s.reference.into(),
            ]);
            timings.push(vec![(s.class + 1).into(), s.method.into(), s.mean_seconds.into()]);
            for r in reps {
                let mut row = vec![Cell::from(r.replication)];
                row.extend(estimate_row(&r.estimate, k, reference));
                detail.push(row);
            }
        }
    }
    Ok(CommandOutput {
        tables: vec![("benchmark".into(), summary), ("benchmark_replications".into(), detail)],
        timings,
    })
}

/// Predecessor statistics of long-delayed jobs under one sampling measure.
///
/// Each count vector has K + 1 slots; the last one collects jobs with no
/// such predecessor (first in cycle, idle server, no earlier departure).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub method: String,
    pub cycles: usize,
    /// Cycles with at least one target-class job above the level.
    pub effective_cycles: usize,
    pub long_jobs: usize,
    /// Per effective cycle: class served immediately before its first
    /// long-delayed job.
    pub first_after: Vec<usize>,
    /// Per long-delayed job: class served immediately before it.
    pub all_after: Vec<usize>,
    /// Per long-delayed job: class in service when it arrived.
    pub blocked_by: Vec<usize>,
    /// Per long-delayed job: class of the last departure before it arrived.
    pub departed: Vec<usize>,
}

impl Profile {
    pub fn first_after_share(&self, class: usize) -> f64 {
        self.first_after[class] as f64 / self.effective_cycles.max(1) as f64
    }

    fn share(counts: &[usize], n: usize) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
    }

    pub fn all_after_shares(&self) -> Vec<f64> {
        Self::share(&self.all_after, self.long_jobs)
    }

    pub fn blocked_by_shares(&self) -> Vec<f64> {
        Self::share(&self.blocked_by, self.long_jobs)
    }

    pub fn departed_shares(&self) -> Vec<f64> {
        Self::share(&self.departed, self.long_jobs)
    }

    pub fn first_after_shares(&self) -> Vec<f64> {
        Self::share(&self.first_after, self.effective_cycles)
    }
}

pub fn profile(
    params: &ModelParams,
    policy: &SamplingPolicy,
    class: usize,
    level: f64,
    cycles: usize,
    runner: &Runner,
    method: &str,
) -> Result<Profile> {
    let k = params.classes();
    let slot = |c: Option<usize>| c.unwrap_or(k);
    let per = runner.map_cycles(params, policy, domain::PROFILE, 0..cycles as u64, |c| {
        let mut first = None;
        let mut counts = [vec![0usize; k + 1], vec![0usize; k + 1], vec![0usize; k + 1]];
        for (i, j) in c.jobs.iter().enumerate() {
            if j.class != class || j.response_time <= level {
                continue;
            }
            let before = c.predecessor_class(i);
            first.get_or_insert(slot(before));
            counts[0][slot(before)] += 1;
            counts[1][slot(j.in_service_class)] += 1;
            counts[2][slot(j.last_departure_class)] += 1;
        }
        (first, counts)
    })?;
    let mut out = Profile {
        method: method.into(),
        cycles,
        effective_cycles: 0,
        long_jobs: 0,
        first_after: vec![0; k + 1],
        all_after: vec![0; k + 1],
        blocked_by: vec![0; k + 1],
        departed: vec![0; k + 1],
    };
    for (first, [after, blocked, departed]) in per {
        if let Some(f) = first {
            out.effective_cycles += 1;
            out.first_after[f] += 1;
        }
        out.long_jobs += after.iter().sum::<usize>();
        for l in 0..=k {
            out.all_after[l] += after[l];
            out.blocked_by[l] += blocked[l];
            out.departed[l] += departed[l];
        }
    }
    Ok(out)
}

/// Profiles for the naive measure, each static tilt and the CE tilt.
pub fn blocking_profiles(cfg: &ExperimentConfig) -> Result<(Vec<Profile>, Option<CeOutcome>)> {
    let prof = cfg
        .profile
        .clone()
        .ok_or_else(|| Error::Config("blocking-profile needs a [profile] section".into()))?;
    let class = prof.class - 1;
    let p = cfg.targets.iter().find(|t| t.class == prof.class).map_or(0.999, |t| t.p);
    let gamma_max = cfg
        .targets
        .iter()
        .find(|t| t.class == prof.class)
        .and_then(|t| t.gamma_max)
        .unwrap_or(prof.level);
    let target = SlaTarget::new(class, p, (gamma_max > 0.0).then_some(gamma_max));
    let runner = runner_for(cfg)?;
    let mut out = vec![profile(&cfg.model, &SamplingPolicy::TrueMeasure, class, prof.level, prof.cycles, &runner, "naive")?];
    for b in &cfg.baselines {
        if let Some(rates) = static_rates(&cfg.model, b, &target, gamma_max)? {
            out.push(profile(&cfg.model, &SamplingPolicy::Switching(rates), class, prof.level, prof.cycles, &runner, b.name())?);
        }
    }
    let ce = run_ce(&cfg.model, &target, &cfg.ce, &runner)?;
    let policy = SamplingPolicy::Switching(ce.rates.clone());
    out.push(profile(&cfg.model, &policy, class, prof.level, prof.cycles, &runner, "ce")?);
    Ok((out, Some(ce)))
}

pub fn blocking_profile(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let started = Instant::now();
    let k = cfg.model.classes();
    let (profiles, _) = blocking_profiles(cfg)?;
    let mut headers: Vec<String> = ["method", "cycles", "effective_cycles", "long_jobs"].iter().map(|s| s.to_string()).collect();
    let groups = ["after_class", "all_after_class", "blocked_by_class", "departed_class"];
    for g in groups {
        headers.extend(class_headers(g, k));
        headers.push(format!("{g}_none"));
    }
    let mut table = Table::new("blocking profile", &headers.iter().map(String::as_str).collect::<Vec<_>>());
    for p in &profiles {
        let mut row: Vec<Cell> = vec![p.method.clone().into(), p.cycles.into(), p.effective_cycles.into(), p.long_jobs.into()];
        for shares in [p.first_after_shares(), p.all_after_shares(), p.blocked_by_shares(), p.departed_shares()] {
            row.extend(shares.into_iter().map(Cell::from));
        }
        table.push(row);
    }
    let mut timings = Table::new("wall-clock seconds", &["command", "seconds"]);
    timings.push(vec!["blocking-profile".into(), started.elapsed().as_secs_f64().into()]);
    Ok(CommandOutput {
        tables: vec![("blocking_profile".into(), table)],
        timings,
    })
}

/// One row of the SLA table.
#[derive(Debug, Clone)]
pub struct SlaResult {
    pub estimate: Estimate,
    /// Pilot σ̂/(√r·Q̂).
    pub pilot_relative_error: f64,
    pub capped: bool,
    pub validation: TailReport,
    pub pilot_seconds: f64,
}

pub fn sla_results(cfg: &ExperimentConfig) -> Result<Vec<SlaResult>> {
    let runner = runner_for(cfg)?;
    let r = cfg.batches;
    let pilot_m = cfg.sla.pilot_cycles.div_ceil(r).max(1) * r;
    let cap = (cfg.sla.max_cycles / r).max(1) * r;
    let mut out = Vec::new();
    for i in 0..cfg.targets.len() {
        let target = cfg.target(i)?;
        let ctx = format!("class {}", target.class + 1);
        let started = Instant::now();
        let pilot_runner = runner.reseeded(derive_seed(cfg.seed, domain::PILOT_IS));
        let pilot = algorithm1(&cfg.model, &target, pilot_m, pilot_m, &cfg.ce, r, &pilot_runner)
            .map_err(|e| with_context(e, &ctx))?;
        let pilot_seconds = started.elapsed().as_secs_f64();
        let wanted = required_cycles(&pilot.report, pilot_m, cfg.sla.target_relative_error, r);
        let m = wanted.min(cap);
        let mut est = algorithm1(&cfg.model, &target, m, m, &cfg.ce, r, &runner).map_err(|e| with_context(e, &ctx))?;
        let started = Instant::now();
        let rates = est.rates.clone().expect("IS estimate carries rates");
        let m_val = cfg.sla.validation_cycles.map_or(m, |v| (v / r).max(1) * r);
        let validation = validate_tail(&cfg.model, target.class, &rates, est.report.q_hat, m_val, r, &runner)
            .map_err(|e| with_context(e, &ctx))?;
        est.timings.validation = started.elapsed().as_secs_f64();
        out.push(SlaResult {
            estimate: est,
            pilot_relative_error: pilot.report.relative_standard_error(),
            capped: wanted > cap,
            validation,
            pilot_seconds,
        });
    }
    Ok(out)
}

/// Per-class SLA quantiles sized to a target relative error, each checked by
/// an independent tail-probability run.
pub fn sla8(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let results = sla_results(cfg)?;
    let mut table = Table::new(
        "SLA quantiles",
        &[
            "class",
            "p",
            "q_hat",
            "ci_low",
            "ci_high",
            "relative_standard_error",
            "cycles",
            "pilot_relative_standard_error",
            "capped",
            "tail_probability",
            "tail_ci_low",
            "tail_ci_high",
            "covers_1_minus_p",
        ],
    );
    let mut timings = Table::new(
        "wall-clock seconds",
        &["class", "pilot", "denominator", "ce", "production", "validation", "total"],
    );
    for s in &results {
        let e = &s.estimate;
        let q = &e.report;
        table.push(vec![
            (e.class + 1).into(),
            q.p.into(),
            q.q_hat.into(),
            q.ci_low.into(),
            q.ci_high.into(),
            q.relative_standard_error().into(),
            (e.cycles / 2).into(),
            s.pilot_relative_error.into(),
            s.capped.into(),
            s.validation.estimate.into(),
            s.validation.ci_low.into(),
            s.validation.ci_high.into(),
            s.validation.covers(1.0 - q.p).into(),
        ]);
        let t = &e.timings;
        timings.push(vec![
            (e.class + 1).into(),
            s.pilot_seconds.into(),
            t.denominator.into(),
            t.ce.into(),
            t.production.into(),
            t.validation.into(),
            (t.total() + s.pilot_seconds).into(),
        ]);
    }
    Ok(CommandOutput {
        tables: vec![("sla".into(), table)],
        timings,
    })
}

/// CE search only.
pub fn ce_search(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let runner = runner_for(cfg)?;
    let k = cfg.model.classes();
    let mut h: Vec<String> = ["class", "iterations", "adopted_level", "gamma_max", "heuristic"].iter().map(|s| s.to_string()).collect();
    h.extend(class_headers("lambda", k));
    h.extend(class_headers("mu", k));
    let mut table = Table::new("CE rates", &h.iter().map(String::as_str).collect::<Vec<_>>());
    let mut hh: Vec<String> = ["class", "t", "gamma", "switch_level"].iter().map(|s| s.to_string()).collect();
    hh.extend(class_headers("lambda", k));
    hh.extend(class_headers("mu", k));
    hh.push("pilot_ci_high".into());
    let mut history = Table::new("CE iterations", &hh.iter().map(String::as_str).collect::<Vec<_>>());
    let mut timings = Table::new("wall-clock seconds", &["class", "t", "seconds"]);
    for i in 0..cfg.targets.len() {
        let target = cfg.target(i)?;
        let o = run_ce(&cfg.model, &target, &cfg.ce, &runner).map_err(|e| with_context(e, &format!("class {}", target.class + 1)))?;
        let mut row: Vec<Cell> = vec![
            (target.class + 1).into(),
            o.iterations.into(),
            o.adopted_level.into(),
            o.gamma_max.into(),
            o.adopted_by_heuristic.into(),
        ];
        row.extend(o.rates.lambda.iter().map(|&v| Cell::from(v)));
        row.extend(o.rates.mu.iter().map(|&v| Cell::from(v)));
        table.push(row);
        for it in &o.history {
            let mut row: Vec<Cell> = vec![(target.class + 1).into(), it.t.into(), it.gamma.into(), it.switch_level.into()];
            row.extend(it.lambda.iter().map(|&v| Cell::from(v)));
            row.extend(it.mu.iter().map(|&v| Cell::from(v)));
            row.push(it.pilot_ci_high.into());
            history.push(row);
            timings.push(vec![(target.class + 1).into(), it.t.into(), it.elapsed_secs.into()]);
        }
    }
    Ok(CommandOutput {
        tables: vec![("ce_search".into(), table), ("ce_history".into(), history)],
        timings,
    })
}

/// Tail probability P(R > γ) per target from an independent IS run under CE
/// rates tuned to γ. Without `gamma`, each target's reference quantile is used.
pub fn validate(cfg: &ExperimentConfig, gamma: Option<f64>) -> Result<CommandOutput> {
    let runner = runner_for(cfg)?;
    let mut table = Table::new(
        "tail probability",
        &["class", "gamma", "estimate", "ci_low", "ci_high", "sigma_hat", "cycles", "reference"],
    );
    let mut timings = Table::new("wall-clock seconds", &["class", "ce", "validation"]);
    for i in 0..cfg.targets.len() {
        let mut target = cfg.target(i)?;
        let g = gamma
            .or_else(|| reference_quantile(cfg, i))
            .ok_or_else(|| Error::Config("validate needs --gamma or a target reference".into()))?;
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {g}")));
        }
        if target.gamma_max.is_none() && g > 0.0 {
            target.gamma_max = Some(g);
        }
        let started = Instant::now();
        let rates = if g > 0.0 {
            run_ce(&cfg.model, &target, &cfg.ce, &runner)?.rates
        } else {
            TiltedRates::identity(&cfg.model, target.class, f64::INFINITY)
        };
        let t_ce = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let rep = validate_tail(&cfg.model, target.class, &rates, g, cfg.m1, cfg.batches, &runner)?;
        let reference = (cfg.model.classes() == 1).then(|| mm1_sojourn_tail(cfg.model.lambda()[0], cfg.model.mu()[0], g));
        table.push(vec![
            (target.class + 1).into(),
            g.into(),
            rep.estimate.into(),
            rep.ci_low.into(),
            rep.ci_high.into(),
            rep.sigma_hat.into(),
            cfg.m1.into(),
            reference.into(),
        ]);
        timings.push(vec![(target.class + 1).into(), t_ce.into(), started.elapsed().as_secs_f64().into()]);
    }
    Ok(CommandOutput {
        tables: vec![("validate".into(), table)],
        timings,
    })
}
