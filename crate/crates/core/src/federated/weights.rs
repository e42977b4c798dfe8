//! Relative importance weights for training on a mixed population while
//! targeting the scarce domain.

use crate::data::Domain;
use crate::privacy::UnigramEstimate;

/// `p_T / (α·p_T + (1−α)·p_π)` from log-likelihoods, computed as
/// `1 / (α + (1−α)·exp(log p_π − log p_T))`.
///
/// Equal likelihoods give exactly 1. The result lies in `(0, 1/α]`.
pub fn relative_weight(log_p_target: f64, log_p_source: f64, alpha: f64) -> f64 {
    if log_p_source == log_p_target {
        return 1.0;
    }
    let ratio = (log_p_source - log_p_target).exp();
    let w = 1.0 / (alpha + (1.0 - alpha) * ratio);
    w.max(f64::MIN_POSITIVE)
}

/// Weight of sequence `x` under unigram likelihoods, skipping `pad`.
pub fn instance_weight(x: &[u32], u_target: &UnigramEstimate, u_source: &UnigramEstimate, alpha: f64, pad: u32) -> f64 {
    relative_weight(u_target.log_likelihood(x, pad), u_source.log_likelihood(x, pad), alpha)
}

/// Per-sequence weighting used by an instance-weighted training phase.
/// The source distribution is chosen by the domain label of each sequence.
#[derive(Debug, Clone)]
pub struct DomainWeights {
    pub target: UnigramEstimate,
    pub source: UnigramEstimate,
    pub alpha: f64,
    pub pad: u32,
}

impl DomainWeights {
    pub fn weight(&self, x: &[u32], domain: Domain) -> f64 {
        match domain {
            Domain::T => 1.0,
            Domain::S => instance_weight(x, &self.target, &self.source, self.alpha, self.pad),
        }
    }
}
