//! Device availability, round-sampling latency, and cohort sampling.
//!
//! A round needs `C` devices. With `N` devices of which a fraction `p` is
//! currently eligible and each eligible device sampled with probability
//! `q`, about `N·p·q` devices are immediately available. The remaining
//! `k = C − N·p·q` must come from the `m = N − N·p` unavailable devices,
//! each of which becomes available after an `Exponential(λ)` delay. The
//! waiting time is the `k`-th order statistic of `m` such delays, whose
//! expectation is `(1/λ)·Σ_{x=m−k+1}^{m} 1/x`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::Seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("invalid population config: {0}")]
    InvalidConfig(String),
    #[error("cohort {cohort} must be smaller than population {population}")]
    CohortTooLarge { cohort: u64, population: u64 },
    /// `N·p·q ≥ C`: enough devices are already available, nothing to wait for.
    #[error("no waiting needed: demand k = {k} is negative (N·p·q exceeds the cohort)")]
    NoWaiting { k: f64 },
    #[error("infeasible demand: need k = {k} devices but only m = {m} are unavailable")]
    InfeasibleDemand { k: u64, m: u64 },
    #[error("monte carlo needs at least one trial")]
    NoTrials,
}

/// Device-availability and sampling parameters for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    /// Number of devices holding relevant data (`N`).
    pub population: u64,
    /// Fraction of devices currently eligible for training (`p`).
    pub eligible_frac: f64,
    /// Per-round sampling probability (`q`).
    pub sample_rate: f64,
    /// Devices required per round (`C`).
    pub cohort: u64,
    /// Arrival rate of the exponential availability model (`λ`).
    pub rate_lambda: f64,
}

/// Expected waiting time for one round together with its closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), PopulationError> {
        let bad = |msg: String| Err(PopulationError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.eligible_frac) {
            return bad(format!("eligible fraction p = {} not in [0, 1]", self.eligible_frac));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return bad(format!("sample rate q = {} not in (0, 1]", self.sample_rate));
        }
        if self.cohort == 0 {
            return bad("cohort must be positive".into());
        }
        if !(self.rate_lambda > 0.0 && self.rate_lambda.is_finite()) {
            return bad(format!("rate lambda = {} must be positive", self.rate_lambda));
        }
        if self.cohort >= self.population {
            return Err(PopulationError::CohortTooLarge {
                cohort: self.cohort,
                population: self.population,
            });
        }
        Ok(())
    }

    /// Real-valued count of currently unavailable devices, `N − N·p`.
    pub fn unavailable(&self) -> f64 {
        let n = self.population as f64;
        n - n * self.eligible_frac
    }

    /// Real-valued number of devices still needed, `C − N·p·q`.
    pub fn demand(&self) -> f64 {
        let n = self.population as f64;
        self.cohort as f64 - n * self.eligible_frac * self.sample_rate
    }

    /// `(m, k)` rounded half-up to counts.
    pub fn counts(&self) -> (u64, i64) {
        let m = round_half_up(self.unavailable()).max(0.0) as u64;
        let k = round_half_up(self.demand()) as i64;
        (m, k)
    }
}

/// Closed-form lower and upper bounds on the expected waiting time.
pub fn latency_bounds(cfg: &PopulationConfig) -> Result<(f64, f64), PopulationError> {
    cfg.validate()?;
    let k = cfg.demand();
    if k < 0.0 {
        return Err(PopulationError::NoWaiting { k });
    }
    let n = cfg.population as f64;
    let c = cfg.cohort as f64;
    let lower = k / (n * (1.0 - cfg.eligible_frac) + 1.0) / cfg.rate_lambda;
    let upper = c / (cfg.rate_lambda * (n - c));
    Ok((lower, upper))
}

/// Exact expected waiting time `(1/λ)·(H_m − H_{m−k})` on the rounded counts.
///
/// A negative demand means the round fills immediately, so the result is 0.
pub fn latency_exact(cfg: &PopulationConfig) -> Result<f64, PopulationError> {
    cfg.validate()?;
    let (m, k) = cfg.counts();
    if k <= 0 {
        return Ok(0.0);
    }
    let k = k as u64;
    if k > m {
        return Err(PopulationError::InfeasibleDemand { k, m });
    }
    Ok(partial_harmonic(m, k) / cfg.rate_lambda)
}

/// `Σ_{x=m−k+1}^{m} 1/x`, summed from the smallest term up.
pub fn partial_harmonic(m: u64, k: u64) -> f64 {
    debug_assert!(k <= m);
    ((m - k + 1)..=m).rev().map(|x| 1.0 / x as f64).sum()
}

/// Bounds and exact value in one call.
pub fn latency_estimate(cfg: &PopulationConfig) -> Result<LatencyEstimate, PopulationError> {
    let (lower, upper) = latency_bounds(cfg)?;
    let exact = latency_exact(cfg)?;
    Ok(LatencyEstimate { lower, exact, upper })
}

const MC_CHUNK: usize = 1024;

/// Monte Carlo estimate of the waiting time: `(mean, standard error)`.
///
/// Each trial draws the `k`-th order statistic of `m` exponential delays
/// as a sum of spacings, spacing `i` being `Exponential((m − i + 1)·λ)`.
/// Trials are split into fixed chunks with their own derived streams and
/// reduced in chunk order, so the result does not depend on thread count.
pub fn latency_monte_carlo(
    cfg: &PopulationConfig,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64), PopulationError> {
    cfg.validate()?;
    if trials == 0 {
        return Err(PopulationError::NoTrials);
    }
    let (m, k) = cfg.counts();
    if k < 1 {
        return Err(PopulationError::NoWaiting { k: cfg.demand() });
    }
    let k = k as u64;
    if k > m {
        return Err(PopulationError::InfeasibleDemand { k, m });
    }
    let lambda = cfg.rate_lambda;
    let root = Seed(seed).child("latency-mc");
    let n_chunks = trials.div_ceil(MC_CHUNK);
    let samples: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = root.index(chunk as u64).rng();
            let len = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            (0..len)
                .map(|_| order_statistic_draw(&mut rng, m, k, lambda))
                .collect()
        })
        .collect();
    let values: Vec<f64> = samples.into_iter().flatten().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

fn order_statistic_draw<R: Rng + ?Sized>(rng: &mut R, m: u64, k: u64, lambda: f64) -> f64 {
    (0..k)
        .map(|i| {
            let e: f64 = Exp1.sample(rng);
            e / ((m - i) as f64 * lambda)
        })
        .sum()
}

/// Poisson sampling: each id is kept independently with probability `q`.
///
/// Membership depends only on `(seed, round)` and the position of each id.
pub fn sample_cohort<T: Clone>(available: &[T], q: f64, seed: u64, round: u64) -> Vec<T> {
    assert!((0.0..=1.0).contains(&q), "sampling rate {q} outside [0, 1]");
    let mut rng = Seed(seed).index(round).rng();
    available
        .iter()
        .filter(|_| rng.random::<f64>() < q)
        .cloned()
        .collect()
}

/// Fixed-size sampling without replacement, for latency experiments only.
/// The privacy accountant assumes Poisson sampling.
pub fn sample_cohort_fixed<T: Clone>(available: &[T], size: usize, seed: u64, round: u64) -> Vec<T> {
    let mut rng = Seed(seed).index(round).rng();
    let size = size.min(available.len());
    let mut idx = rand::seq::index::sample(&mut rng, available.len(), size).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| available[i].clone()).collect()
}

/// Outcome of evaluating one `(N, C)` cell of a latency sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Ok {
        estimate: LatencyEstimate,
        monte_carlo: Option<(f64, f64)>,
    },
    NoWaiting,
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub config: PopulationConfig,
    pub status: SweepStatus,
}

/// Evaluates every `(N, C)` pair, N-major. Infeasible cells are kept and flagged.
pub fn latency_sweep(
    populations: &[u64],
    cohorts: &[u64],
    eligible_frac: f64,
    sample_rate: f64,
    rate_lambda: f64,
    trials: usize,
    seed: u64,
) -> Vec<SweepCell> {
    let mut cells = Vec::with_capacity(populations.len() * cohorts.len());
    for &population in populations {
        for &cohort in cohorts {
            let config = PopulationConfig {
                population,
                eligible_frac,
                sample_rate,
                cohort,
                rate_lambda,
            };
            let status = match latency_estimate(&config) {
                Ok(estimate) => {
                    let monte_carlo = if trials > 0 {
                        latency_monte_carlo(&config, trials, seed).ok()
                    } else {
                        None
                    };
                    SweepStatus::Ok {
                        estimate,
                        monte_carlo,
                    }
                }
                Err(PopulationError::NoWaiting { .. }) => SweepStatus::NoWaiting,
                Err(e) => SweepStatus::Infeasible(e.to_string()),
            };
            cells.push(SweepCell { config, status });
        }
    }
    cells
}
