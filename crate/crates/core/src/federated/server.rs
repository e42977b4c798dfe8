//! Server-side state and the adaptive (Adam) server optimizer.

use serde::{Deserialize, Serialize};

use super::FederatedError;
use crate::langmodel::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub tau: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            tau: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    /// Global round counter, never reset.
    pub round: u64,
    pub params: ModelParams,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    /// Optimizer steps since the moments were last reset.
    pub adam_steps: u64,
    pub phase: String,
}

impl ServerState {
    pub fn new(params: ModelParams, phase: impl Into<String>) -> Self {
        let n = params.len();
        Self {
            round: 0,
            params,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            adam_steps: 0,
            phase: phase.into(),
        }
    }

    /// Starts a new phase with fresh optimizer moments.
    pub fn enter_phase(&mut self, phase: impl Into<String>) {
        self.adam_m.fill(0.0);
        self.adam_v.fill(0.0);
        self.adam_steps = 0;
        self.phase = phase.into();
    }
}

/// One bias-corrected Adam step that treats `delta` as the ascent direction:
/// `θ ← θ + lr·m̂/(√v̂ + τ)`.
pub fn server_step(state: &mut ServerState, delta: &[f64], server_lr: f64, adam: &AdamConfig) -> Result<(), FederatedError> {
    if delta.len() != state.params.len() {
        return Err(FederatedError::Dimension {
            expected: state.params.len(),
            found: delta.len(),
        });
    }
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(FederatedError::NonFinite("server update".into()));
    }
    state.adam_steps += 1;
    state.round += 1;
    let t = state.adam_steps as i32;
    let c1 = 1.0 - adam.beta1.powi(t);
    let c2 = 1.0 - adam.beta2.powi(t);
    for (((theta, m), v), &d) in state
        .params
        .values
        .iter_mut()
        .zip(state.adam_m.iter_mut())
        .zip(state.adam_v.iter_mut())
        .zip(delta)
    {
        *m = adam.beta1 * *m + (1.0 - adam.beta1) * d;
        *v = adam.beta2 * *v + (1.0 - adam.beta2) * d * d;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta += server_lr * m_hat / (v_hat.sqrt() + adam.tau);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langmodel::{ModelConfig, ModelParams};

    fn tiny() -> ModelParams {
        let cfg = ModelConfig {
            vocab_size: 5,
            embed_dim: 1,
            hidden_dim: 1,
            seq_len: 2,
        };
        let n = cfg.param_count();
        ModelParams::from_values(cfg, (0..n).map(|i| i as f64 * 0.1).collect()).unwrap()
    }

    #[test]
    fn zero_delta_or_zero_lr_leaves_params() {
        let p = tiny();
        let mut s = ServerState::new(p.clone(), "x");
        server_step(&mut s, &vec![0.0; p.len()], 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(s.params, p);
        let mut s = ServerState::new(p.clone(), "x");
        server_step(&mut s, &vec![0.3; p.len()], 0.0, &AdamConfig::default()).unwrap();
        assert_eq!(s.params, p);
        assert_eq!(s.round, 1);
    }

    #[test]
    fn matches_scalar_recurrence() {
        let p = tiny();
        let n = p.len();
        let adam = AdamConfig::default();
        let lr = 0.1;
        let mut s = ServerState::new(p.clone(), "x");
        let deltas = [0.02, 0.02, -0.05];
        let (mut theta, mut m, mut v) = (p.values[0], 0.0f64, 0.0f64);
        let mut steps = Vec::new();
        for (t, d) in deltas.iter().enumerate() {
            let before = s.params.values[0];
            server_step(&mut s, &vec![*d; n], lr, &adam).unwrap();
            steps.push((s.params.values[0] - before).abs());
            m = 0.9 * m + (1.0 - 0.9) * d;
            v = 0.99 * v + (1.0 - 0.99) * d * d;
            let tt = (t + 1) as i32;
            let m_hat = m / (1.0 - 0.9f64.powi(tt));
            let v_hat = v / (1.0 - 0.99f64.powi(tt));
            theta += lr * m_hat / (v_hat.sqrt() + 1e-3);
            assert!((s.params.values[0] - theta).abs() <= 1e-14 * theta.abs().max(1e-3));
        }
        // identical consecutive deltas: bias correction keeps the step size fixed
        assert!((steps[0] - steps[1]).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let p = tiny();
        let mut s = ServerState::new(p.clone(), "x");
        assert!(server_step(&mut s, &[0.0], 0.1, &AdamConfig::default()).is_err());
        let mut bad = vec![0.0; p.len()];
        bad[0] = f64::NAN;
        assert!(matches!(
            server_step(&mut s, &bad, 0.1, &AdamConfig::default()),
            Err(FederatedError::NonFinite(_))
        ));
    }
}
