//! Accuracy feedback for the search loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::policy::QuantPolicy;

/// Source of the accuracy numbers in the reward.
pub trait AccuracyOracle {
    /// Accuracy (percent) of `model` quantized with `policy`.
    fn evaluate(&self, model: &NetworkModel, policy: &QuantPolicy) -> Result<f64>;

    /// Accuracy of the unquantized model.
    fn reference_accuracy(&self, model: &NetworkModel) -> f64;
}

pub const SYNTHETIC_BASE_ACCURACY: f64 = 71.0;
pub const SYNTHETIC_SCALE: f64 = 0.6;

/// Additive per-step sensitivity model:
/// `acc = A0 - C * sum_k s_k * 2^-(b_k - 2)` with `s_k ~ U[0.1, 1.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSensitivity {
    pub seed: u64,
    /// One entry per step, weight step first for every layer.
    pub sensitivities: Vec<f64>,
    pub base_accuracy: f64,
    pub scale: f64,
}

impl SyntheticSensitivity {
    pub fn new(seed: u64, n_layers: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SyntheticSensitivity {
            seed,
            sensitivities: (0..2 * n_layers).map(|_| rng.random_range(0.1..=1.0)).collect(),
            base_accuracy: SYNTHETIC_BASE_ACCURACY,
            scale: SYNTHETIC_SCALE,
        }
    }

    pub fn for_model(seed: u64, model: &NetworkModel) -> Self {
        Self::new(seed, model.len())
    }

    /// Accuracy for a flat list of step bitwidths.
    pub fn accuracy_of_steps(&self, steps: &[u8]) -> f64 {
        let penalty: f64 = self.sensitivities.iter().zip(steps).map(|(s, &b)| s * (-(b as f64 - 2.0)).exp2()).sum();
        self.base_accuracy - self.scale * penalty
    }
}

impl AccuracyOracle for SyntheticSensitivity {
    fn evaluate(&self, model: &NetworkModel, policy: &QuantPolicy) -> Result<f64> {
        if policy.len() != model.len() || self.sensitivities.len() != 2 * model.len() {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} layers, model has {}, oracle covers {}",
                policy.len(),
                model.len(),
                self.sensitivities.len() / 2
            )));
        }
        Ok(self.accuracy_of_steps(&policy.steps()))
    }

    fn reference_accuracy(&self, _model: &NetworkModel) -> f64 {
        self.base_accuracy
    }
}

/// Oracle selection in a run config: `{"kind": "synthetic", "seed": 42}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    Synthetic { seed: u64 },
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::Synthetic { seed: 42 }
    }
}

impl OracleConfig {
    pub fn build(&self, model: &NetworkModel) -> Box<dyn AccuracyOracle + Send + Sync> {
        match *self {
            OracleConfig::Synthetic { seed } => Box::new(SyntheticSensitivity::for_model(seed, model)),
        }
    }
}
