//! Ratio estimators over regenerative cycles.
//!
//! The numerator pools class-k jobs from importance-sampled cycles, each
//! weighted by its likelihood ratio at enter-service time. The denominator is
//! the mean number of class-k jobs per cycle from naive cycles.

use serde::{Deserialize, Serialize};

use crate::engine::CycleRecord;
use crate::error::{Error, Result};

/// z-value of the two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;
pub const DEFAULT_BATCHES: usize = 30;

/// The class-k view of one cycle: its job count and (R, log L(E)) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCycle {
    pub alpha_k: u64,
    pub entries: Vec<(f64, f64)>,
}

impl ClassCycle {
    pub fn from_record(rec: &CycleRecord, class: usize) -> Self {
        let entries = rec
            .jobs
            .iter()
            .filter(|j| j.class == class)
            .map(|j| (j.response_time, j.ll_at_enter_service))
            .collect();
        Self {
            alpha_k: rec.alpha_k[class],
            entries,
        }
    }

    /// Ỹ(γ) = Σ_n L_n 1{R_n > γ}.
    pub fn weighted_exceedance(&self, gamma: f64) -> f64 {
        self.entries
            .iter()
            .filter(|(r, _)| *r > gamma)
            .map(|(_, ll)| ll.exp())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEntry {
    pub response: f64,
    pub weight: f64,
    pub cycle: usize,
    pub seq: usize,
}

/// Pooled class-k jobs from m1 IS cycles, sorted ascending by response time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    entries: Vec<WeightedEntry>,
    m1: usize,
}

impl WeightedSample {
    pub fn from_entries(mut entries: Vec<WeightedEntry>, m1: usize) -> Result<Self> {
        if m1 == 0 {
            return Err(Error::Domain("m1 must be at least 1".into()));
        }
        if entries.iter().any(|e| !(e.weight >= 0.0) || !(e.response >= 0.0)) {
            return Err(Error::Domain("weights and responses must be non-negative".into()));
        }
        entries.sort_by(|a, b| {
            a.response
                .total_cmp(&b.response)
                .then(a.cycle.cmp(&b.cycle))
                .then(a.seq.cmp(&b.seq))
        });
        Ok(Self { entries, m1 })
    }

    pub fn from_cycles(cycles: &[ClassCycle]) -> Result<Self> {
        let entries = cycles
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                c.entries.iter().enumerate().map(move |(n, &(r, ll))| WeightedEntry {
                    response: r,
                    weight: ll.exp(),
                    cycle: i,
                    seq: n,
                })
            })
            .collect();
        Self::from_entries(entries, cycles.len())
    }

    pub fn entries(&self) -> &[WeightedEntry] {
        &self.entries
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    /// β, the number of pooled class-k jobs.
    pub fn beta(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries with response strictly above `gamma`.
    pub fn exceedances(&self, gamma: f64) -> usize {
        self.entries.len() - self.entries.partition_point(|e| e.response <= gamma)
    }
}

/// Naive-cycle estimate of E[α_k].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenominatorEstimate {
    pub m2: usize,
    pub sum_alpha_k: u64,
}

impl DenominatorEstimate {
    pub fn new(m2: usize, sum_alpha_k: u64) -> Result<Self> {
        if m2 == 0 {
            return Err(Error::Domain("m2 must be at least 1".into()));
        }
        Ok(Self { m2, sum_alpha_k })
    }

    pub fn from_cycles(cycles: &[ClassCycle]) -> Result<Self> {
        Self::new(cycles.len(), cycles.iter().map(|c| c.alpha_k).sum())
    }

    pub fn mean_alpha_k(&self) -> f64 {
        self.sum_alpha_k as f64 / self.m2 as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

#[inline]
fn ratio(weight_sum: f64, m1: usize, den: &DenominatorEstimate) -> f64 {
    (weight_sum / m1 as f64) / den.mean_alpha_k()
}

/// P̂(R > γ) = [m1⁻¹ Σ_i Σ_n L 1{R > γ}] / [m2⁻¹ Σ_i α_k^i].
pub fn tail_probability(ws: &WeightedSample, den: &DenominatorEstimate, gamma: f64) -> Result<f64> {
    if den.sum_alpha_k == 0 {
        return Err(Error::EmptyDenominator);
    }
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("gamma must be >= 0, got {gamma}")));
    }
    let start = ws.entries.partition_point(|e| e.response <= gamma);
    // Summed from the top down so quantile() reproduces the same partial sums.
    let mut acc = Kahan::default();
    for e in ws.entries[start..].iter().rev() {
        acc.add(e.weight);
    }
    Ok(ratio(acc.sum, ws.m1, den))
}

/// Q̂(p) = inf{γ : P̂(R > γ) < 1 − p}, which is always one of the sampled
/// response times.
pub fn quantile(ws: &WeightedSample, den: &DenominatorEstimate, p: f64) -> Result<f64> {
    if ws.is_empty() {
        return Err(Error::EmptySample);
    }
    if den.sum_alpha_k == 0 {
        return Err(Error::EmptyDenominator);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must be in (0,1), got {p}")));
    }
    let level = 1.0 - p;
    let entries = &ws.entries;
    let mut acc = Kahan::default();
    let mut best = None;
    let mut hi = entries.len();
    while hi > 0 {
        let value = entries[hi - 1].response;
        let lo = entries[..hi].partition_point(|e| e.response < value);
        // acc holds the weight strictly above `value`.
        let tail = ratio(acc.sum, ws.m1, den);
        if tail.is_nan() {
            return Err(Error::Unresolvable(format!("non-finite tail mass at {value}")));
        }
        if tail < level {
            best = Some(value);
        }
        for e in entries[lo..hi].iter().rev() {
            acc.add(e.weight);
        }
        hi = lo;
    }
    best.ok_or_else(|| Error::Unresolvable("no sample point below the tail level".into()))
}

/// True when even the largest sample carries more tail mass than 1 − p, so
/// the estimate is pinned to the sample maximum.
pub fn is_censored(ws: &WeightedSample, den: &DenominatorEstimate, p: f64) -> Result<bool> {
    let Some(top) = ws.entries.last() else {
        return Err(Error::EmptySample);
    };
    let below_top = ws.entries.partition_point(|e| e.response < top.response);
    let mass: f64 = ws.entries[below_top..].iter().map(|e| e.weight).sum();
    Ok(ratio(mass, ws.m1, den) > 1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub p: f64,
    pub q_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sigma_hat: f64,
    pub r: usize,
    pub c: usize,
    /// σ̂_m / Q̂_m.
    pub relative_error: f64,
    pub batch_estimates: Vec<f64>,
    pub beta: usize,
    pub censored: bool,
}

impl QuantileReport {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Standard error of Q̂ relative to Q̂, σ̂/(√r·Q̂).
    pub fn relative_standard_error(&self) -> f64 {
        self.relative_error / (self.r as f64).sqrt()
    }
}

/// Consecutive batch ranges whose sizes differ by at most one.
fn batch_ranges(m1: usize, m2: usize, r: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if r < 2 {
        return Err(Error::Domain(format!("need at least 2 batches, got {r}")));
    }
    if m1 != m2 {
        return Err(Error::Domain(format!("batching needs m1 = m2, got {m1} and {m2}")));
    }
    if m1 < r {
        return Err(Error::Domain(format!("{m1} cycles do not fill {r} batches")));
    }
    Ok((0..r).map(|b| b * m1 / r..(b + 1) * m1 / r).collect())
}

fn batch_stats(point: f64, batches: &[f64]) -> (f64, f64) {
    let r = batches.len() as f64;
    let var = batches.iter().map(|q| (q - point).powi(2)).sum::<f64>() / (r - 1.0);
    let sigma = var.sqrt();
    (sigma, Z_95 * sigma / r.sqrt())
}

/// Batch-means confidence interval for Q̂(p) with m1 = m2 = m split into r
/// consecutive batches of ⌊m/r⌋ or ⌈m/r⌉ cycles.
pub fn batch_ci(is: &[ClassCycle], naive: &[ClassCycle], p: f64, r: usize) -> Result<QuantileReport> {
    let ranges = batch_ranges(is.len(), naive.len(), r)?;
    let c = is.len() / r;
    let ws = WeightedSample::from_cycles(is)?;
    let den = DenominatorEstimate::from_cycles(naive)?;
    let q_hat = quantile(&ws, &den, p)?;
    let censored = is_censored(&ws, &den, p)?;

    let batch_estimates = (0..r)
        .map(|b| {
            let range = ranges[b].clone();
            let bws = WeightedSample::from_cycles(&is[range.clone()])?;
            let bden = DenominatorEstimate::from_cycles(&naive[range])?;
            if bws.is_empty() || bden.sum_alpha_k == 0 {
                return Err(Error::BatchTooSmall { batch: b });
            }
            quantile(&bws, &bden, p)
        })
        .collect::<Result<Vec<f64>>>()?;

    let (sigma_hat, half) = batch_stats(q_hat, &batch_estimates);
    Ok(QuantileReport {
        p,
        q_hat,
        ci_low: q_hat - half,
        ci_high: q_hat + half,
        sigma_hat,
        r,
        c,
        relative_error: sigma_hat / q_hat,
        batch_estimates,
        beta: ws.beta(),
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub gamma: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sigma_hat: f64,
    pub r: usize,
}

impl TailReport {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Batch-means confidence interval for P̂(R > γ).
pub fn tail_ci(is: &[ClassCycle], naive: &[ClassCycle], gamma: f64, r: usize) -> Result<TailReport> {
    let ranges = batch_ranges(is.len(), naive.len(), r)?;
    let ws = WeightedSample::from_cycles(is)?;
    let den = DenominatorEstimate::from_cycles(naive)?;
    let estimate = tail_probability(&ws, &den, gamma)?;
    let batches = (0..r)
        .map(|b| {
            let range = ranges[b].clone();
            let bws = WeightedSample::from_cycles(&is[range.clone()])?;
            let bden = DenominatorEstimate::from_cycles(&naive[range])?;
            if bden.sum_alpha_k == 0 {
                return Err(Error::BatchTooSmall { batch: b });
            }
            tail_probability(&bws, &bden, gamma)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (sigma_hat, half) = batch_stats(estimate, &batches);
    Ok(TailReport {
        gamma,
        estimate,
        ci_low: estimate - half,
        ci_high: estimate + half,
        sigma_hat,
        r,
    })
}

/// Sample variance of Z_i = Ỹ_i(γ) − P̂(R > γ) α_k^i, pairing IS cycle i with
/// naive cycle i.
pub fn z_variance(is: &[ClassCycle], naive: &[ClassCycle], gamma: f64) -> Result<f64> {
    if is.len() != naive.len() {
        return Err(Error::Domain("z_variance pairs cycles index by index; lengths differ".into()));
    }
    if is.len() < 2 {
        return Err(Error::Domain("need at least two cycles".into()));
    }
    let ws = WeightedSample::from_cycles(is)?;
    let den = DenominatorEstimate::from_cycles(naive)?;
    let p_hat = tail_probability(&ws, &den, gamma)?;
    let z: Vec<f64> = is
        .iter()
        .zip(naive)
        .map(|(c, n)| c.weighted_exceedance(gamma) - p_hat * n.alpha_k as f64)
        .collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    Ok(z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64)
}

/// Cycle count needed to bring the relative standard error of Q̂ down to
/// `target`, given a pilot of `pilot_cycles` cycles. Rounded up to a
/// multiple of `r`.
pub fn required_cycles(pilot: &QuantileReport, pilot_cycles: usize, target: f64, r: usize) -> usize {
    let scale = (pilot.relative_standard_error() / target).powi(2);
    let m = (pilot_cycles as f64 * scale).ceil().max(r as f64) as usize;
    m.div_ceil(r) * r
}
