//! Client-side training step.

use super::FederatedError;
use crate::data::{ClientRecord, Domain};
use crate::langmodel::{self, ModelParams};
use crate::privacy::{clip_in_place, l2_norm};

/// A client's contribution to one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    /// Clipped model difference `θ_i − θ`.
    pub delta: Vec<f64>,
    /// L2 norm before clipping.
    pub raw_norm: f64,
    pub clipped: bool,
}

/// Gathers the client's sequences for `domains` with their weights.
pub fn client_batch<'a>(
    client: &'a ClientRecord,
    domains: &[Domain],
    weight_fn: &dyn Fn(&[u32], Domain) -> f64,
) -> (Vec<&'a [u32]>, Vec<f64>) {
    let mut seqs = Vec::new();
    let mut weights = Vec::new();
    for &d in domains {
        for s in client.sequences(d) {
            seqs.push(s.as_slice());
            weights.push(weight_fn(s, d));
        }
    }
    (seqs, weights)
}

/// One full-batch SGD step on the client's weighted loss, then
/// `clip(θ_i − θ, clip)`.
pub fn local_update(
    client: &ClientRecord,
    domains: &[Domain],
    theta: &ModelParams,
    client_lr: f64,
    weight_fn: &dyn Fn(&[u32], Domain) -> f64,
    clip: f64,
) -> Result<LocalUpdate, FederatedError> {
    let (seqs, weights) = client_batch(client, domains, weight_fn);
    if seqs.is_empty() {
        return Err(FederatedError::EmptyClient(client.id.clone()));
    }
    let g = langmodel::grad(theta, &seqs, &weights)?;
    let mut delta: Vec<f64> = theta
        .values
        .iter()
        .zip(&g.0)
        .map(|(&t, &gi)| (t - client_lr * gi) - t)
        .collect();
    let raw_norm = l2_norm(&delta);
    let clipped = clip_in_place(&mut delta, clip);
    Ok(LocalUpdate {
        delta,
        raw_norm,
        clipped,
    })
}
