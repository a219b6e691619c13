//! Star-level splitting, triplet batching, the optimisation loop and checkpoints.

mod checkpoint;
mod split;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossBreakdown, LossWeights};

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, Progress, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use split::{make_epoch_batches, split_dataset, Split};
pub use trainer::{train_model, write_log, Trainer};

fn default_batch_size() -> usize {
    64
}
fn default_max_epochs() -> usize {
    200
}
fn default_lr() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    10
}
fn default_min_delta() -> f64 {
    1e-4
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_tau() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Triplets per batch.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Smallest validation decrease that resets the patience counter.
    #[serde(default = "default_min_delta")]
    pub min_delta: f64,
    /// Fraction of stars held out for validation.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            lr: default_lr(),
            patience: default_patience(),
            min_delta: default_min_delta(),
            val_fraction: default_val_fraction(),
            seed: 0,
            weights: LossWeights::default(),
            tau: default_tau(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("train: {msg}")));
        if self.batch_size < 2 {
            return fail("batch_size must be at least 2");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be positive");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return fail("val_fraction must lie in (0, 0.5)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail("lr must be finite and >= 0");
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return fail("min_delta must be finite and >= 0");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail("tau must be positive");
        }
        self.weights.validate()
    }
}

/// One line of the training log. Epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
    pub lr: f64,
}
