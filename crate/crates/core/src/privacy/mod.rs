//! Differential-privacy machinery: clipping, Gaussian aggregation, the
//! geometric mechanism, RDP accounting with noise calibration, private
//! unigram estimation, and the per-run privacy ledger.

pub mod accountant;
pub mod ledger;
pub mod mechanisms;
pub mod unigram;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use accountant::{
    calibrate_sigma, default_orders, epsilon_and_order, epsilon_for, epsilon_from_rdp, rdp_sampled_gaussian,
    RdpCurve,
};
pub use ledger::{LedgerEntry, LedgerTotal, Mechanism, PrivacyLedger};
pub use mechanisms::{
    clip_in_place, clip_to_norm, gaussian_aggregate, gaussian_aggregate_calibrated, geometric_noise,
    geometric_ratio, l2_norm, sample_two_sided_geometric,
};
pub use unigram::{private_unigrams, UnigramEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("invalid privacy parameter: {0}")]
    InvalidParameter(String),
    #[error("Renyi order {0} must be an integer of at least 2")]
    InvalidOrder(u32),
    #[error("empty Renyi order grid")]
    EmptyOrders,
    #[error("noise calibration bracket exhausted at [{lo}, {hi}]")]
    BracketExhausted { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid budget split: {0}")]
    InvalidBudget(String),
}

/// Privacy parameters of one training phase, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    /// Total budget of the run.
    pub epsilon: f64,
    pub delta: f64,
    /// Budget reserved for the unigram release (0 when unused).
    pub epsilon0: f64,
    pub delta0: f64,
    /// Noise multiplier calibrated for this phase.
    pub sigma: f64,
    /// Rounds in this phase.
    pub rounds: u64,
    /// Poisson sampling rate of this phase.
    pub q: f64,
    /// L2 clip bound on client model differences.
    pub clip: f64,
}

impl PrivacySpec {
    pub fn validate(&self) -> Result<(), PrivacyError> {
        if !(self.epsilon > 0.0) {
            return Err(PrivacyError::InvalidBudget(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PrivacyError::InvalidBudget(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.epsilon0 >= 0.0 && self.epsilon0 < self.epsilon) {
            return Err(PrivacyError::InvalidBudget(format!(
                "epsilon0 {} must be in [0, epsilon = {})",
                self.epsilon0, self.epsilon
            )));
        }
        if !(self.delta0 >= 0.0 && self.delta0 <= self.delta) {
            return Err(PrivacyError::InvalidBudget(format!(
                "delta0 {} must be in [0, delta = {}]",
                self.delta0, self.delta
            )));
        }
        if !(self.sigma >= 0.0) || !(self.clip > 0.0) {
            return Err(PrivacyError::InvalidParameter("sigma must be nonnegative and clip positive".into()));
        }
        Ok(())
    }
}
