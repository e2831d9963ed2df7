//! Adam with bias correction.

use super::weights::{Grads, ModelWeights};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Continues the step count from an earlier run (moments start from zero).
    pub fn resume_at(&mut self, t: u64) {
        self.t = t;
    }

    pub fn step(&mut self, weights: &mut ModelWeights, grads: &Grads) {
        adam_step(weights.flat_mut(), grads.flat(), self);
    }
}

/// θ ← θ − lr · m̂ / (√v̂ + eps), with m̂, v̂ bias-corrected at the incremented step t.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut Adam) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
    } = state.cfg;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= learning_rate * mhat / (vhat.sqrt() + eps);
    }
}
