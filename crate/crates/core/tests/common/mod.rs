//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use tailq::engine::{CycleRecord, JobRecord};
use tailq::measure::{StoppedStats, TiltedRates};

pub fn job(class: usize, response: f64, ll: f64) -> JobRecord {
    JobRecord {
        class,
        arrival_time: 0.0,
        enter_service_time: 0.0,
        departure_time: response,
        service_time: response,
        response_time: response,
        ll_at_enter_service: ll,
        last_departure_class: None,
        in_service_class: None,
    }
}

pub struct Tiny {
    /// (class, response, log L) per job.
    pub jobs: Vec<(usize, f64, f64)>,
    pub arrivals: [u64; 2],
    pub interarrival: [f64; 2],
    pub age: [f64; 2],
    pub services: [u64; 2],
    pub service_sum: [f64; 2],
}

pub fn cycle(t: &Tiny) -> CycleRecord {
    let jobs: Vec<JobRecord> = t.jobs.iter().map(|&(c, r, ll)| job(c, r, ll)).collect();
    let mut alpha_k = vec![0; 2];
    for j in &jobs {
        alpha_k[j.class] += 1;
    }
    CycleRecord {
        alpha: 10.0,
        alpha_k,
        tau_k: None,
        switched: false,
        target_class: Some(1),
        stopped: Some(StoppedStats {
            time: 10.0,
            arrivals: t.arrivals.to_vec(),
            interarrival_sum: t.interarrival.to_vec(),
            age: t.age.to_vec(),
            services: t.services.to_vec(),
            service_sum: t.service_sum.to_vec(),
        }),
        events: 0,
        jobs,
    }
}

pub fn five_cycles() -> Vec<CycleRecord> {
    let raw = [
        Tiny {
            jobs: vec![(1, 5.0, -0.2), (0, 1.0, 0.0), (1, 2.0, 0.1)],
            arrivals: [2, 3],
            interarrival: [4.0, 3.5],
            age: [0.5, 1.0],
            services: [2, 3],
            service_sum: [3.0, 6.0],
        },
        Tiny {
            jobs: vec![(1, 6.5, -1.1)],
            arrivals: [1, 2],
            interarrival: [2.0, 1.5],
            age: [2.5, 0.2],
            services: [1, 2],
            service_sum: [0.7, 4.4],
        },
        Tiny {
            jobs: vec![(0, 3.0, 0.3), (1, 1.0, 0.0)],
            arrivals: [3, 1],
            interarrival: [5.0, 2.0],
            age: [0.1, 0.3],
            services: [3, 1],
            service_sum: [2.0, 0.5],
        },
        Tiny {
            jobs: vec![(1, 4.2, 0.4), (1, 7.0, -0.6)],
            arrivals: [4, 2],
            interarrival: [6.0, 2.5],
            age: [1.0, 1.5],
            services: [4, 2],
            service_sum: [5.0, 5.5],
        },
        Tiny {
            jobs: vec![(1, 3.9, 0.0), (0, 4.5, -0.3)],
            arrivals: [1, 5],
            interarrival: [1.0, 6.0],
            age: [3.0, 0.4],
            services: [1, 4],
            service_sum: [1.2, 7.0],
        },
    ];
    raw.iter().map(cycle).collect()
}

pub const GAMMA: f64 = 3.95;

/// Elite weights written out by hand: Σ exp(ll) over class-1 jobs with R > 3.95.
pub fn weights() -> [f64; 5] {
    [(-0.2f64).exp(), (-1.1f64).exp(), 0.0, 0.4f64.exp() + (-0.6f64).exp(), 0.0]
}

/// The sampled CE objective written out from the raw cycle data.
pub fn objective(cycles: &[CycleRecord], lambda: [f64; 2], mu: [f64; 2]) -> f64 {
    let w = weights();
    let mut total = 0.0;
    for (c, wi) in cycles.iter().zip(w) {
        let s = c.stopped.as_ref().unwrap();
        for l in 0..2 {
            let log_f_arrivals = s.arrivals[l] as f64 * lambda[l].ln() - lambda[l] * (s.interarrival_sum[l] + s.age[l]);
            let log_f_services = s.services[l] as f64 * mu[l].ln() - mu[l] * s.service_sum[l];
            total += wi * (log_f_arrivals + log_f_services);
        }
    }
    total / cycles.len() as f64
}

pub fn start() -> TiltedRates {
    TiltedRates::new(vec![0.1, 0.2], vec![1.0, 1.0], 1, 4.0).unwrap()
}

pub fn grid() -> impl Iterator<Item = f64> {
    (1..=300).map(|i| i as f64 * 0.01)
}
