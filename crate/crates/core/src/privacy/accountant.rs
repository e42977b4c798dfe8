//! Rényi-DP accounting for the Poisson-subsampled Gaussian mechanism.
//!
//! At an integer order `α` the Rényi divergence between the subsampled
//! mixture `(1−q)·N(0,σ²) + q·N(1,σ²)` and `N(0,σ²)` has the binomial
//! expansion
//!
//! ```text
//! A_α = Σ_{k=0}^{α} C(α,k) (1−q)^{α−k} q^k exp((k² − k) / (2σ²))
//! ε(α) = ln(A_α) / (α − 1)
//! ```
//!
//! evaluated in log space. `T` rounds compose linearly and convert to
//! `(ε, δ)` through `ε = min_α [T·ε(α) + ln(1/δ)/(α − 1)]`.

use serde::{Deserialize, Serialize};

use super::PrivacyError;

/// Default order grid: `{2, …, 64} ∪ {128, 256}`.
pub fn default_orders() -> Vec<u32> {
    (2..=64).chain([128, 256]).collect()
}

/// Per-round RDP values at each order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    pub orders: Vec<u32>,
    pub values: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_a_int(q: f64, sigma: f64, alpha: u32) -> f64 {
    let ln_q = q.ln();
    let ln_1mq = (-q).ln_1p();
    let two_var = 2.0 * sigma * sigma;
    let a = f64::from(alpha);
    let mut log_binom = 0.0f64;
    let mut acc = f64::NEG_INFINITY;
    for k in 0..=alpha {
        if k > 0 {
            // C(α,k) = C(α,k−1)·(α−k+1)/k
            log_binom += ((a - f64::from(k) + 1.0) / f64::from(k)).ln();
        }
        let kf = f64::from(k);
        let term = log_binom + kf * ln_q + (a - kf) * ln_1mq + (kf * kf - kf) / two_var;
        acc = log_add(acc, term);
    }
    acc
}

/// Per-round RDP of the Poisson-subsampled Gaussian mechanism with noise
/// multiplier `sigma` and sampling rate `q`, at each integer order.
///
/// `q = 0` yields the all-zero curve (no data is touched).
pub fn rdp_sampled_gaussian(q: f64, sigma: f64, orders: &[u32]) -> Result<RdpCurve, PrivacyError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(PrivacyError::InvalidParameter(format!("sampling rate {q} not in [0, 1]")));
    }
    if !(sigma > 0.0) {
        return Err(PrivacyError::InvalidParameter(format!("noise multiplier {sigma} must be positive")));
    }
    if orders.is_empty() {
        return Err(PrivacyError::EmptyOrders);
    }
    if let Some(&bad) = orders.iter().find(|&&o| o < 2) {
        return Err(PrivacyError::InvalidOrder(bad));
    }
    let values = orders
        .iter()
        .map(|&alpha| {
            if q == 0.0 {
                0.0
            } else if q == 1.0 {
                f64::from(alpha) / (2.0 * sigma * sigma)
            } else {
                (log_a_int(q, sigma, alpha) / f64::from(alpha - 1)).max(0.0)
            }
        })
        .collect();
    Ok(RdpCurve {
        orders: orders.to_vec(),
        values,
    })
}

/// Best `(ε, order)` after composing the curve over `rounds` rounds.
pub fn epsilon_and_order(curve: &RdpCurve, rounds: u64, delta: f64) -> Result<(f64, u32), PrivacyError> {
    if curve.orders.is_empty() {
        return Err(PrivacyError::EmptyOrders);
    }
    if rounds == 0 {
        return Err(PrivacyError::InvalidParameter("round count must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PrivacyError::InvalidParameter(format!("delta {delta} not in (0, 1)")));
    }
    let log_inv_delta = -delta.ln();
    let t = rounds as f64;
    let mut best = (f64::INFINITY, curve.orders[0]);
    for (&alpha, &rdp) in curve.orders.iter().zip(&curve.values) {
        let eps = t * rdp + log_inv_delta / f64::from(alpha - 1);
        if eps < best.0 {
            best = (eps, alpha);
        }
    }
    Ok(best)
}

/// `(ε, δ)` guarantee of `rounds` compositions of the curve's mechanism.
pub fn epsilon_from_rdp(curve: &RdpCurve, rounds: u64, delta: f64) -> Result<f64, PrivacyError> {
    epsilon_and_order(curve, rounds, delta).map(|(eps, _)| eps)
}

/// Privacy spent by `rounds` rounds of the subsampled Gaussian mechanism.
pub fn epsilon_for(q: f64, sigma: f64, rounds: u64, delta: f64, orders: &[u32]) -> Result<f64, PrivacyError> {
    epsilon_from_rdp(&rdp_sampled_gaussian(q, sigma, orders)?, rounds, delta)
}

const SIGMA_MIN: f64 = 1e-4;
const SIGMA_MAX: f64 = 1e6;

/// Smallest noise multiplier (to within `tol`) whose accounted ε after
/// `rounds` rounds lies in `[ε·(1 − tol), ε]`.
pub fn calibrate_sigma(
    q: f64,
    rounds: u64,
    epsilon: f64,
    delta: f64,
    tol: f64,
    orders: &[u32],
) -> Result<f64, PrivacyError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PrivacyError::InvalidParameter(format!("epsilon {epsilon} must be positive")));
    }
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(PrivacyError::InvalidParameter(format!("tolerance {tol} not in (0, 0.1]")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(PrivacyError::InvalidParameter(format!("sampling rate {q} not in (0, 1]")));
    }
    let eps_at = |sigma: f64| epsilon_for(q, sigma, rounds, delta, orders);

    let mut hi = 1.0;
    while eps_at(hi)? > epsilon {
        hi *= 2.0;
        if hi > SIGMA_MAX {
            return Err(PrivacyError::BracketExhausted { lo: SIGMA_MIN, hi: SIGMA_MAX });
        }
    }
    let mut lo = hi / 2.0;
    while eps_at(lo)? <= epsilon {
        lo /= 2.0;
        if lo < SIGMA_MIN {
            return Err(PrivacyError::BracketExhausted { lo: SIGMA_MIN, hi });
        }
    }
    let floor = epsilon * (1.0 - tol);
    for _ in 0..200 {
        if eps_at(hi)? >= floor {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(PrivacyError::BracketExhausted { lo, hi })
}
