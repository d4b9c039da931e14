mod common;

use common::{five_cycles, grid, job, objective, start, GAMMA};
use tailq::ce::{ce_objective, ce_update};
use tailq::engine::CycleRecord;

#[test]
fn update_matches_grid_maximum() {
    let cycles = five_cycles();
    let fit = ce_update(&cycles, GAMMA, &start()).unwrap();
    let cur = [fit.lambda[0], fit.lambda[1], fit.mu[0], fit.mu[1]];

    // Joint grid over each (λ_l, μ_l) pair with the other class held at an
    // arbitrary point; the objective is additive across classes.
    for l in 0..2 {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for a in grid() {
            for b in grid() {
                let mut lambda = [0.5, 0.5];
                let mut mu = [0.5, 0.5];
                lambda[l] = a;
                mu[l] = b;
                let v = objective(&cycles, lambda, mu);
                if v > best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert!((best.1 - cur[l]).abs() <= 0.01, "lambda_{l}: grid {} vs {}", best.1, cur[l]);
        assert!((best.2 - cur[2 + l]).abs() <= 0.01, "mu_{l}: grid {} vs {}", best.2, cur[2 + l]);
    }
}

#[test]
fn objective_matches_library() {
    let cycles = five_cycles();
    for (lambda, mu) in [([0.3, 0.7], [1.1, 0.4]), ([0.05, 2.0], [0.9, 0.9])] {
        let mine = objective(&cycles, lambda, mu);
        let lib = ce_objective(&cycles, 1, GAMMA, &lambda, &mu).unwrap();
        assert!((mine - lib).abs() <= 1e-12 * mine.abs(), "{mine} vs {lib}");
    }
}

#[test]
fn update_is_a_local_maximum() {
    let cycles = five_cycles();
    let fit = ce_update(&cycles, GAMMA, &start()).unwrap();
    let base = [fit.lambda[0], fit.lambda[1], fit.mu[0], fit.mu[1]];
    let at = |x: [f64; 4]| objective(&cycles, [x[0], x[1]], [x[2], x[3]]);
    let best = at(base);
    for i in 0..4 {
        for f in [0.99, 1.01] {
            let mut x = base;
            x[i] *= f;
            assert!(at(x) < best, "component {i} scaled by {f}");
        }
    }
}

#[test]
fn uniform_weights_give_the_stopped_mle() {
    // Every cycle has exactly one elite class-1 job with log L = 0.
    let mut cycles = five_cycles();
    for c in &mut cycles {
        c.jobs = vec![job(1, 10.0, 0.0)];
        c.alpha_k = vec![0, 1];
    }
    let fit = ce_update(&cycles, GAMMA, &start()).unwrap();
    for l in 0..2 {
        let (mut n, mut expo, mut ns, mut ss) = (0.0, 0.0, 0.0, 0.0);
        for c in &cycles {
            let s = c.stopped.as_ref().unwrap();
            n += s.arrivals[l] as f64;
            expo += s.interarrival_sum[l] + s.age[l];
            ns += s.services[l] as f64;
            ss += s.service_sum[l];
        }
        assert_eq!(fit.lambda[l], n / expo);
        assert_eq!(fit.mu[l], ns / ss);
    }
}

#[test]
fn non_elite_cycles_do_not_matter() {
    let cycles = five_cycles();
    let fit = ce_update(&cycles, GAMMA, &start()).unwrap();
    let elite: Vec<CycleRecord> = [0, 1, 3].iter().map(|&i| cycles[i].clone()).collect();
    let fit2 = ce_update(&elite, GAMMA, &start()).unwrap();
    for l in 0..2 {
        assert!((fit.lambda[l] - fit2.lambda[l]).abs() < 1e-15);
        assert!((fit.mu[l] - fit2.mu[l]).abs() < 1e-15);
    }
}
