//! Desk-scale simulator for private federated learning of small language
//! models when the target population is scarce.
//!
//! Modules, bottom-up:
//!
//! * [`population`]: device availability, round latency, cohort sampling.
//! * [`privacy`]: clipping, Gaussian and geometric mechanisms, RDP accounting.
//! * [`data`]: corpora, preprocessing, synthetic two-domain populations.
//! * [`langmodel`]: a word-level LSTM with an explicit backward pass.
//! * [`federated`]: rounds, server optimizer, training schedules.
//! * [`experiment`]: suite configs, manifests, reports.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod langmodel;
pub mod population;
pub mod privacy;
pub mod seed;

pub use error::{Error, Result};
pub use seed::Seed;
