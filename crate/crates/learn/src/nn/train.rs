//! Shared training configuration and loss-curve record.

use std::collections::BTreeMap;

use qtomo_core::{Error, Result};

use super::adam::AdamConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub seed: u64,
    pub ortho_weight: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 10,
            seed: 0,
            ortho_weight: 0.1,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(self.ortho_weight >= 0.0) {
            return bad("ortho_weight must be nonnegative");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Hyperparameters as checkpoint metadata.
    pub fn to_meta(&self, meta: &mut BTreeMap<String, String>) {
        meta.insert("train.batch_size".into(), self.batch_size.to_string());
        meta.insert("train.learning_rate".into(), self.learning_rate.to_string());
        meta.insert("train.adam_beta1".into(), self.adam_beta1.to_string());
        meta.insert("train.adam_beta2".into(), self.adam_beta2.to_string());
        meta.insert("train.adam_eps".into(), self.adam_eps.to_string());
        meta.insert("train.epochs".into(), self.epochs.to_string());
        meta.insert("train.seed".into(), self.seed.to_string());
        meta.insert("train.ortho_weight".into(), self.ortho_weight.to_string());
        if let Some(c) = self.grad_clip {
            meta.insert("train.grad_clip".into(), c.to_string());
        }
    }
}

/// Per-epoch mean training losses.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingCurve {
    pub epoch_loss: Vec<f64>,
    /// Auxiliary term per epoch (orthogonality penalty or selector cross-entropy).
    pub epoch_aux: Vec<f64>,
    pub steps: u64,
}

impl TrainingCurve {
    pub fn first(&self) -> Option<f64> {
        self.epoch_loss.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}
