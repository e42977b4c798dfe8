//! Private unigram frequencies released with the geometric mechanism.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mechanisms::{geometric_ratio, sample_two_sided_geometric};
use super::PrivacyError;
use crate::data::{ClientRecord, Domain};

/// Smoothed, normalized unigram distribution for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramEstimate {
    pub domain: Domain,
    /// Noisy per-token counts after clamping negatives to zero.
    pub counts: Vec<f64>,
    /// `Σ counts + smoothing·V`.
    pub total: f64,
    pub smoothing: f64,
    /// Set when the estimate fell back to uniform because no client contributed.
    pub uniform_fallback: bool,
    log_probs: Vec<f64>,
}

impl UnigramEstimate {
    pub fn from_counts(domain: Domain, counts: Vec<f64>, smoothing: f64) -> Self {
        assert!(smoothing > 0.0, "smoothing must be positive");
        let total = counts.iter().sum::<f64>() + smoothing * counts.len() as f64;
        let log_total = total.ln();
        let log_probs = counts.iter().map(|c| (c + smoothing).ln() - log_total).collect();
        Self {
            domain,
            counts,
            total,
            smoothing,
            uniform_fallback: false,
            log_probs,
        }
    }

    pub fn uniform(domain: Domain, vocab_size: usize) -> Self {
        let mut est = Self::from_counts(domain, vec![0.0; vocab_size], 1.0);
        est.uniform_fallback = true;
        est
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn prob(&self, token: u32) -> f64 {
        (self.counts[token as usize] + self.smoothing) / self.total
    }

    pub fn log_prob(&self, token: u32) -> f64 {
        self.log_probs[token as usize]
    }

    /// `ln Π û(x_i)` over the non-PAD tokens of `seq`.
    pub fn log_likelihood(&self, seq: &[u32], pad: u32) -> f64 {
        seq.iter().filter(|&&t| t != pad).map(|&t| self.log_prob(t)).sum()
    }
}

/// Noisy unigram counts for `domain` over `clients`.
///
/// Each client contributes the tokens of at most its first `max_sequences`
/// sequences in the domain, each exactly `seq_len` tokens long, so one
/// client moves the count vector by at most `Δ = max_sequences·seq_len` in
/// L1. Every count gets two-sided geometric noise with ratio `exp(−ε₀/Δ)`;
/// negatives are clamped to zero and add-one smoothing is applied.
pub fn private_unigrams<R: Rng + ?Sized>(
    clients: &[&ClientRecord],
    domain: Domain,
    vocab_size: usize,
    epsilon0: f64,
    max_sequences: usize,
    seq_len: usize,
    rng: &mut R,
) -> Result<UnigramEstimate, PrivacyError> {
    if !(epsilon0 > 0.0) {
        return Err(PrivacyError::InvalidParameter(format!("epsilon0 {epsilon0} must be positive")));
    }
    if max_sequences == 0 || seq_len == 0 {
        return Err(PrivacyError::InvalidParameter("contribution bound must be positive".into()));
    }
    if clients.is_empty() {
        return Ok(UnigramEstimate::uniform(domain, vocab_size));
    }
    let mut raw = vec![0i64; vocab_size];
    for client in clients {
        for seq in client.sequences(domain).iter().take(max_sequences) {
            if seq.len() != seq_len {
                return Err(PrivacyError::InvalidParameter(format!(
                    "client {} has a sequence of length {} (expected {seq_len})",
                    client.id,
                    seq.len()
                )));
            }
            for &tok in seq {
                let slot = raw.get_mut(tok as usize).ok_or_else(|| {
                    PrivacyError::InvalidParameter(format!("token {tok} outside vocabulary of {vocab_size}"))
                })?;
                *slot += 1;
            }
        }
    }
    let sensitivity = u32::try_from(max_sequences * seq_len)
        .map_err(|_| PrivacyError::InvalidParameter("sensitivity overflows u32".into()))?;
    let r = geometric_ratio(epsilon0, sensitivity);
    let counts = raw
        .into_iter()
        .map(|c| (c + sample_two_sided_geometric(r, rng)).max(0) as f64)
        .collect();
    Ok(UnigramEstimate::from_counts(domain, counts, 1.0))
}
