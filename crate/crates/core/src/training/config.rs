use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub iterations: u64,
    pub dssim_weight: f64,
    pub mse_weight: f64,
    pub eye_weight: f64,
    pub mask_loss_weight: f64,
    pub trueface_weight: f64,
    pub gan_weight: f64,
    /// Width of the first discriminator layer.
    pub gan_channels: usize,
    /// Probability that a parameter's update is applied; 1 disables dropout.
    pub lr_dropout_keep: f64,
    pub cai_init: bool,
    /// Random flip and scale jitter of training faces.
    pub augment: bool,
    pub seed: u64,
    /// Checkpoint period in iterations (0 = only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 4,
            iterations: 1000,
            dssim_weight: 10.0,
            mse_weight: 10.0,
            eye_weight: 3.0,
            mask_loss_weight: 1.0,
            trueface_weight: 0.01,
            gan_weight: 0.1,
            gan_channels: 16,
            lr_dropout_keep: 1.0,
            cai_init: false,
            augment: true,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(invalid("lr must be positive"));
        }
        for (n, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid(format!("{n} must lie in (0, 1)")));
            }
        }
        for (n, w) in [
            ("dssim_weight", self.dssim_weight),
            ("mse_weight", self.mse_weight),
            ("eye_weight", self.eye_weight),
            ("mask_loss_weight", self.mask_loss_weight),
            ("trueface_weight", self.trueface_weight),
            ("gan_weight", self.gan_weight),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(invalid(format!("{n} must be a non-negative number")));
            }
        }
        if !(self.lr_dropout_keep > 0.0 && self.lr_dropout_keep <= 1.0) {
            return Err(invalid("lr_dropout_keep must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be positive"));
        }
        if self.gan_weight > 0.0 && self.gan_channels == 0 {
            return Err(invalid("gan_channels must be positive"));
        }
        Ok(())
    }
}
