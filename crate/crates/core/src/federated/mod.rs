//! Private federated training rounds and the population-expansion schedules.

mod client;
mod schedule;
mod server;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{client_batch, local_update, LocalUpdate};
pub use schedule::{
    plan_phases, run_round, run_schedule, PhasePlan, PhaseSeeds, PhaseSummary, RoundResult, RunOutcome,
    METRICS_HEADER,
};
pub use server::{server_step, AdamConfig, ServerState};
pub use weights::{instance_weight, relative_weight, DomainWeights};

use crate::langmodel::ModelError;
use crate::population::PopulationError;
use crate::privacy::PrivacyError;

#[derive(Debug, Error)]
pub enum FederatedError {
    #[error("client {0} has no sequences for this phase")]
    EmptyClient(String),
    #[error("update has {found} entries, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no {0} data to evaluate on")]
    NoEvalData(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Population(#[from] PopulationError),
}

/// Which clients train, in what order, and with what weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Target clients only, cohort `α·C`.
    TargetSmall,
    /// Target clients only, cohort `C`.
    TargetLarge,
    /// Every client, cohort `C`.
    Union,
    /// Unigram release, then instance-weighted training on every client.
    Iw,
    /// Pretrain on source clients, finetune on target clients with `α·C`.
    Pt,
    /// As `Pt` with instance-weighted pretraining.
    Iwpt,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 6] = [
        ScheduleKind::TargetSmall,
        ScheduleKind::TargetLarge,
        ScheduleKind::Union,
        ScheduleKind::Iw,
        ScheduleKind::Pt,
        ScheduleKind::Iwpt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::TargetSmall => "target-small",
            ScheduleKind::TargetLarge => "target-large",
            ScheduleKind::Union => "union",
            ScheduleKind::Iw => "iw",
            ScheduleKind::Pt => "pt",
            ScheduleKind::Iwpt => "iwpt",
        }
    }

    pub fn uses_unigrams(self) -> bool {
        matches!(self, ScheduleKind::Iw | ScheduleKind::Iwpt)
    }

    pub fn is_two_phase(self) -> bool {
        matches!(self, ScheduleKind::Pt | ScheduleKind::Iwpt)
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = FederatedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| FederatedError::InvalidConfig(format!("unknown schedule `{s}`")))
    }
}

/// Everything a schedule run needs besides data, model shape, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub rounds: u64,
    /// Pretraining rounds of two-phase schedules; `None` means half.
    pub pretrain_rounds: Option<u64>,
    /// Training cohort `C`.
    pub cohort: u64,
    /// Cohort the noise is calibrated for; noise std is `σ·clip/calibration_cohort`.
    pub calibration_cohort: u64,
    /// Target-population proportion.
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Unigram-release budget of the weighted schedules.
    pub epsilon0: f64,
    pub clip: f64,
    pub server_lr: f64,
    pub client_lr: f64,
    pub eval_every: u64,
    /// Sequences per client counted by the unigram release.
    pub unigram_max_sequences: usize,
    /// Eligible fraction `p` for the latency model.
    pub eligible_frac: f64,
    pub rate_lambda: f64,
    /// Fixed noise multiplier instead of calibration; 0 disables noise.
    pub noise_multiplier: Option<f64>,
    pub calibration_tol: f64,
    pub orders: Option<Vec<u32>>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 2000,
            pretrain_rounds: None,
            cohort: 400,
            calibration_cohort: 5000,
            alpha: 0.1,
            epsilon: 2.0,
            delta: 1e-6,
            epsilon0: 0.8,
            clip: 0.5,
            server_lr: 0.1,
            client_lr: 0.5,
            eval_every: 50,
            unigram_max_sequences: 5,
            eligible_frac: 0.5,
            rate_lambda: 1.0,
            noise_multiplier: None,
            calibration_tol: 0.01,
            orders: None,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, kind: ScheduleKind) -> Result<(), FederatedError> {
        let bad = |m: String| Err(FederatedError::InvalidConfig(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if kind.is_two_phase() {
            let pre = self.pretrain_rounds();
            if pre == 0 || pre >= self.rounds {
                return bad(format!(
                    "pretrain_rounds {pre} must leave both phases nonempty within {} rounds",
                    self.rounds
                ));
            }
        }
        if self.cohort == 0 || self.calibration_cohort == 0 {
            return bad("cohort and calibration_cohort must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} not in (0, 1]", self.alpha));
        }
        if kind.uses_unigrams() && self.alpha >= 1.0 {
            return bad("instance weighting needs alpha < 1".into());
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("budget ({}, {}) is invalid", self.epsilon, self.delta));
        }
        if kind.uses_unigrams() && !(self.epsilon0 > 0.0 && self.epsilon0 < self.epsilon) {
            return bad(format!("epsilon0 {} must be in (0, epsilon = {})", self.epsilon0, self.epsilon));
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip {} must be positive", self.clip));
        }
        for (name, v) in [("server_lr", self.server_lr), ("client_lr", self.client_lr)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be finite and nonnegative"));
            }
        }
        if self.eval_every == 0 || self.unigram_max_sequences == 0 {
            return bad("eval_every and unigram_max_sequences must be positive".into());
        }
        if let Some(s) = self.noise_multiplier {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("noise_multiplier {s} must be finite and nonnegative"));
            }
        }
        if !(self.calibration_tol > 0.0 && self.calibration_tol <= 0.1) {
            return bad(format!("calibration_tol {} not in (0, 0.1]", self.calibration_tol));
        }
        Ok(())
    }

    pub fn pretrain_rounds(&self) -> u64 {
        self.pretrain_rounds.unwrap_or(self.rounds / 2)
    }

    pub fn orders(&self) -> Vec<u32> {
        self.orders.clone().unwrap_or_else(crate::privacy::default_orders)
    }

    /// How many devices each simulated client stands for.
    pub fn scale(&self) -> f64 {
        self.calibration_cohort as f64 / self.cohort as f64
    }
}
