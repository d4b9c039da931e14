//! Discrete-event simulation of one regenerative cycle of the non-preemptive
//! priority queue.
//!
//! A cycle starts at a regeneration epoch (a departure that leaves the system
//! empty) at time 0 and ends at the next such departure. The idle period
//! before the first arrival is part of the cycle, so the tilted inter-arrival
//! densities also govern who arrives first.
//!
//! Scheduling: at a service completion the head of the highest-priority
//! non-empty queue starts service; FIFO within a class; an arrival to an
//! idle server starts service at once. Equal timestamps are ordered
//! departure first, then by class index.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, SamplingPolicy, StoppedStats};
use crate::model::ModelParams;

pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    /// Abort a cycle after this many events.
    pub max_events: u64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub class: usize,
    pub arrival_time: f64,
    pub enter_service_time: f64,
    pub departure_time: f64,
    pub service_time: f64,
    pub response_time: f64,
    /// log L(E) at this job's enter-service time.
    pub ll_at_enter_service: f64,
    /// Class of the last job to depart before this job arrived, within the cycle.
    pub last_departure_class: Option<usize>,
    /// Class of the job in service when this job arrived; `None` if idle.
    pub in_service_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// Jobs in order of service start.
    pub jobs: Vec<JobRecord>,
    /// Cycle length α.
    pub alpha: f64,
    /// α_l: jobs of class l served in the cycle.
    pub alpha_k: Vec<u64>,
    /// τ_k, if the measure switched.
    pub tau_k: Option<f64>,
    pub switched: bool,
    pub target_class: Option<usize>,
    /// Stopped data at τ_k ∧ α (tilted policies only).
    pub stopped: Option<StoppedStats>,
    pub events: u64,
}

impl CycleRecord {
    /// Class of the job served immediately before job `index`.
    pub fn predecessor_class(&self, index: usize) -> Option<usize> {
        index.checked_sub(1).map(|i| self.jobs[i].class)
    }

    /// Largest response time among class-`class` jobs, 0 if there are none.
    pub fn max_response(&self, class: usize) -> f64 {
        self.jobs
            .iter()
            .filter(|j| j.class == class)
            .map(|j| j.response_time)
            .fold(0.0, f64::max)
    }

}

#[derive(Debug, Clone, Copy)]
struct Waiting {
    job: usize,
    service: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    job: usize,
    class: usize,
    departure: f64,
}

/// Queue contents and counters at the current instant.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub clock: f64,
    queues: Vec<VecDeque<Waiting>>,
    /// Σ attached service times of waiting jobs, per class.
    queued_work: Vec<f64>,
    in_service: Option<InService>,
    /// N^A_l(t).
    pub arrivals: Vec<u64>,
    /// N^S_l(t).
    pub entered: Vec<u64>,
    /// Time of the last class-l arrival (0 before the first).
    pub last_arrival: Vec<f64>,
    last_departed: Option<usize>,
}

impl ServerState {
    pub fn new(classes: usize) -> Self {
        Self {
            clock: 0.0,
            queues: vec![VecDeque::new(); classes],
            queued_work: vec![0.0; classes],
            in_service: None,
            arrivals: vec![0; classes],
            entered: vec![0; classes],
            last_arrival: vec![0.0; classes],
            last_departed: None,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }

    pub fn waiting(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    /// Residual service time of the job in service at the current clock.
    pub fn residual_service(&self) -> f64 {
        self.in_service
            .map_or(0.0, |s| (s.departure - self.clock).max(0.0))
    }

    /// Adds a waiting job with an attached service time (used by tests and
    /// the engine alike).
    pub fn enqueue(&mut self, class: usize, job: usize, service: Option<f64>) {
        if let Some(s) = service {
            self.queued_work[class] += s;
        }
        self.queues[class].push_back(Waiting { job, service });
    }

    /// Puts a job in service until `departure`.
    pub fn occupy(&mut self, class: usize, job: usize, departure: f64) {
        debug_assert!(self.in_service.is_none(), "non-preemption violated");
        self.in_service = Some(InService {
            job,
            class,
            departure,
        });
    }

    /// R′ for an arriving class-`k` job with attached service `own_service`:
    /// residual of the job in service, plus the attached work of waiting jobs
    /// of classes 0..=k, plus the job's own service time.
    pub fn lower_bound_response(&self, k: usize, own_service: f64) -> f64 {
        let queued: f64 = self.queued_work[..=k].iter().sum();
        self.residual_service() + queued + own_service
    }

    fn pop_next(&mut self) -> Option<(usize, Waiting)> {
        for (class, queue) in self.queues.iter_mut().enumerate() {
            if let Some(w) = queue.pop_front() {
                if let Some(s) = w.service {
                    self.queued_work[class] -= s;
                }
                if queue.is_empty() {
                    self.queued_work[class] = 0.0;
                }
                return Some((class, w));
            }
        }
        None
    }
}

/// Simulates one regenerative cycle with default options.
pub fn simulate_cycle<R: Rng + ?Sized>(
    params: &ModelParams,
    policy: &SamplingPolicy,
    rng: &mut R,
) -> Result<CycleRecord> {
    simulate_cycle_with(params, policy, rng, &EngineOptions::default())
}

pub fn simulate_cycle_with<R: Rng + ?Sized>(
    params: &ModelParams,
    policy: &SamplingPolicy,
    rng: &mut R,
    opts: &EngineOptions,
) -> Result<CycleRecord> {
    let classes = params.classes();
    let mut measure = Measure::new(params, policy)?;
    let target = measure.target_class();
    let mut state = ServerState::new(classes);
    let mut jobs: Vec<JobRecord> = Vec::new();
    let mut next_arrival: Vec<f64> = (0..classes)
        .map(|l| measure.draw_interarrival(l, rng))
        .collect();
    let mut events: u64 = 0;

    loop {
        events += 1;
        if events > opts.max_events {
            return Err(Error::CycleLengthExceeded {
                cap: opts.max_events,
            });
        }

        let (arr_class, arr_time) = next_arrival
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (l, t)| if t < best.1 { (l, t) } else { best });

        match state.in_service {
            Some(svc) if svc.departure <= arr_time => {
                // Departure.
                state.clock = svc.departure;
                let rec = &mut jobs[svc.job];
                rec.departure_time = svc.departure;
                rec.response_time = svc.departure - rec.arrival_time;
                state.in_service = None;
                state.last_departed = Some(svc.class);

                match state.pop_next() {
                    None => {
                        measure.stop(state.clock, &state.last_arrival);
                        break;
                    }
                    Some((class, w)) => {
                        start_service(&mut state, &mut measure, &mut jobs, rng, class, w.job, w.service);
                    }
                }
            }
            _ => {
                // Arrival of class `arr_class`.
                let l = arr_class;
                let now = arr_time;
                state.clock = now;
                measure.record_arrival(l, now - state.last_arrival[l]);
                state.last_arrival[l] = now;
                state.arrivals[l] += 1;

                let service = measure
                    .attaches_at_arrival(l)
                    .then(|| measure.draw_service(l, rng));

                if target == Some(l) && measure.is_tilting() {
                    let own = service.expect("target class attaches service at arrival");
                    let r_prime = state.lower_bound_response(l, own);
                    if measure.on_arrival_check_switch(r_prime, now, &state.last_arrival) {
                        // Pending clocks of other classes restart under the
                        // true rates (memoryless residuals).
                        for (j, t) in next_arrival.iter_mut().enumerate() {
                            if j != l {
                                *t = now + measure.draw_interarrival(j, rng);
                            }
                        }
                    }
                }
                next_arrival[l] = now + measure.draw_interarrival(l, rng);

                let job = jobs.len();
                jobs.push(JobRecord {
                    class: l,
                    arrival_time: now,
                    enter_service_time: f64::NAN,
                    departure_time: f64::NAN,
                    service_time: service.unwrap_or(f64::NAN),
                    response_time: f64::NAN,
                    ll_at_enter_service: 0.0,
                    last_departure_class: state.last_departed,
                    in_service_class: state.in_service.map(|s| s.class),
                });
                if state.is_idle() {
                    start_service(&mut state, &mut measure, &mut jobs, rng, l, job, service);
                } else {
                    state.enqueue(l, job, service);
                }
            }
        }
    }

    // Jobs were pushed in arrival order; report them in service order.
    jobs.sort_by(|a, b| a.enter_service_time.total_cmp(&b.enter_service_time));
    let mut alpha_k = vec![0u64; classes];
    for j in &jobs {
        alpha_k[j.class] += 1;
    }
    let tau_k = measure.switched_at();
    Ok(CycleRecord {
        jobs,
        alpha: state.clock,
        alpha_k,
        tau_k,
        switched: tau_k.is_some(),
        target_class: target,
        stopped: measure.into_stopped(),
        events,
    })
}

fn start_service<R: Rng + ?Sized>(
    state: &mut ServerState,
    measure: &mut Measure<'_>,
    jobs: &mut [JobRecord],
    rng: &mut R,
    class: usize,
    job: usize,
    attached: Option<f64>,
) {
    let now = state.clock;
    let service = match attached {
        Some(s) => s,
        None => measure.draw_service(class, rng),
    };
    state.entered[class] += 1;
    let rec = &mut jobs[job];
    rec.enter_service_time = now;
    rec.service_time = service;
    rec.ll_at_enter_service = measure.likelihood_at_enter_service(now, &state.last_arrival);
    state.occupy(class, job, now + service);
}
