//! Record of every private release in a run, sufficient to recompute the
//! total guarantee without rerunning anything.
//!
//! Composition rule: releases that touch the same sub-population add up
//! (sequential composition); disjoint sub-populations are combined by
//! taking the maximum (parallel composition).

use serde::{Deserialize, Serialize};

use super::accountant::epsilon_for;
use super::PrivacyError;
use crate::data::Domain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum Mechanism {
    /// Pure ε-DP release (δ = 0).
    Geometric { epsilon: f64, sensitivity: u32 },
    /// `rounds` rounds of the Poisson-subsampled Gaussian mechanism,
    /// converted to (ε, δ) at `delta`.
    SubsampledGaussian { q: f64, sigma: f64, rounds: u64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    /// Disjoint sub-populations whose data the release touches.
    pub populations: Vec<Domain>,
    #[serde(flatten)]
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    pub orders: Vec<u32>,
    pub entries: Vec<LedgerEntry>,
}

/// Total guarantee per sub-population and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTotal {
    pub per_population: Vec<(Domain, f64, f64)>,
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyLedger {
    pub fn new(orders: Vec<u32>) -> Self {
        Self {
            orders,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, label: impl Into<String>, populations: &[Domain], mechanism: Mechanism) {
        self.entries.push(LedgerEntry {
            label: label.into(),
            populations: populations.to_vec(),
            mechanism,
        });
    }

    pub fn entry_cost(&self, entry: &LedgerEntry) -> Result<(f64, f64), PrivacyError> {
        match entry.mechanism {
            Mechanism::Geometric { epsilon, .. } => Ok((epsilon, 0.0)),
            Mechanism::SubsampledGaussian { q, sigma, rounds, delta } => {
                Ok((epsilon_for(q, sigma, rounds, delta, &self.orders)?, delta))
            }
        }
    }

    pub fn total(&self) -> Result<LedgerTotal, PrivacyError> {
        let costs = self
            .entries
            .iter()
            .map(|e| self.entry_cost(e))
            .collect::<Result<Vec<_>, _>>()?;
        let mut per_population = Vec::new();
        for domain in [Domain::S, Domain::T] {
            let (mut eps, mut delta) = (0.0, 0.0);
            for (entry, (e, d)) in self.entries.iter().zip(&costs) {
                if entry.populations.contains(&domain) {
                    eps += e;
                    delta += d;
                }
            }
            per_population.push((domain, eps, delta));
        }
        let epsilon = per_population.iter().map(|p| p.1).fold(0.0, f64::max);
        let delta = per_population.iter().map(|p| p.2).fold(0.0, f64::max);
        Ok(LedgerTotal {
            per_population,
            epsilon,
            delta,
        })
    }
}
