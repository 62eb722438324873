//! Baseline tweet classifier: a single-layer unidirectional GRU trained
//! from scratch with Adam, generic over the floating-point type.

mod adam;
mod checkpoint;
mod network;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use checkpoint::{
    read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, CheckpointHeader,
    CHECKPOINT_MAGIC,
};
pub use network::{
    dropout_mask, forward, gru_cell, loss_and_grads, softmax, Dropout, ForwardCache, SequenceCache,
};
pub use params::{init_params, GruParams, Matrix, TensorSpec, TENSOR_NAMES};
pub use train::{
    encode_corpus, predict, select_best, train, tweet_accuracy, Checkpoint, EpochRecord,
    TrainOutcome,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GruConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_len: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            embed_dim: 300,
            hidden: 500,
            dropout_rate: 0.5,
            batch_size: 32,
            epochs: 15,
            max_len: 50,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl GruConfig {
    pub fn lr(&self) -> f64 {
        self.adam.lr
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.adam.lr
            )));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::InvalidArgument(
                "Adam betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_baseline_recipe() {
        let c = GruConfig::default();
        assert_eq!(c.hidden, 500);
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.epochs, 15);
        assert_eq!(c.max_len, 50);
        assert_eq!(c.dropout_rate, 0.5);
        assert_eq!(c.lr(), 1e-3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_catches_bad_values() {
        for bad in [
            GruConfig {
                dropout_rate: 1.0,
                ..Default::default()
            },
            GruConfig {
                batch_size: 0,
                ..Default::default()
            },
            GruConfig {
                adam: AdamConfig {
                    lr: 0.0,
                    ..Default::default()
                },
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
