use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

fn default_transforms() -> usize {
    4
}

/// Hyper-parameters of one training stage.
///
/// `hidden_dims` is read by the encoder (exactly one hidden layer) and ignored
/// by the single-layer head. `transforms` is the number of input
/// transformations in the encoder's pseudo-label task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_scale: f64,
    #[serde(default = "default_transforms")]
    pub transforms: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        // zero is admitted: it pins the weights at their initialisation
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(invalid(format!("init_scale must be positive, got {}", self.init_scale)));
        }
        Ok(())
    }

    /// Default encoder stage: 16 tanh units, 4 pseudo-label transforms.
    pub fn encoder_default(seed: u64) -> Self {
        Self {
            hidden_dims: vec![16],
            epochs: 200,
            learning_rate: 0.5,
            seed,
            init_scale: 1.0,
            transforms: 4,
        }
    }

    /// Default head stage.
    pub fn head_default(seed: u64) -> Self {
        Self {
            hidden_dims: Vec::new(),
            epochs: 300,
            learning_rate: 0.5,
            seed,
            init_scale: 1.0,
            transforms: default_transforms(),
        }
    }
}
