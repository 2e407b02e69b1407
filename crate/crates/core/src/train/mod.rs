//! Trainers for the scratch-built network: per-sample gradient descent
//! with momentum, and batch Levenberg-Marquardt.
//!
//! Both trainers are single-threaded and deterministic in their seed: the
//! caller seed is split into independent streams for weight
//! initialization and (for the momentum trainer) epoch shuffling, so two
//! runs with the same `(config, dataset, params, seed)` are identical to
//! the bit.

mod backprop;
mod lm;
mod momentum;

pub use backprop::{
    compute_deltas, compute_deltas_into, error_gradient, finite_difference_gradient,
    output_jacobian_row_into, Deltas,
};
pub use lm::{fit_levenberg_marquardt, train_levenberg_marquardt, LmHyperParams};
pub use momentum::{momentum_delta, momentum_step, train_momentum, MomentumHyperParams};

use serde::{Deserialize, Serialize};

use crate::dataset::MisoDataset;
use crate::error::{Error, Result};
use crate::network::{ForwardTrace, Network, NetworkConfig};

/// Seed stream for weight initialization.
pub(crate) const WEIGHT_STREAM: u64 = 0;
/// Seed stream for the momentum trainer's epoch shuffles.
pub(crate) const SHUFFLE_STREAM: u64 = 1;

/// Splits one seed into decorrelated streams (splitmix64 finalizer over
/// the stream-offset seed). Every seeded component of the toolkit derives
/// its RNG seeds through this function, so documenting a run takes one
/// number.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub network: Network,
    pub epochs_run: usize,
    /// Mean-squared error over the full dataset after each epoch.
    pub epoch_losses: Vec<f64>,
    /// RMSE over the full dataset with the final weights, on the same
    /// (normalized) scale as the targets.
    pub final_rmse: f64,
    /// The caller-facing seed that produced this run.
    pub seed: u64,
}

/// Root-mean-square error between two equally long sequences.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "rmse needs equal non-empty sequences, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

/// Checks a (config, dataset) pair before training: single output, non-
/// empty data, matching arity.
pub(crate) fn check_training_inputs(config: &NetworkConfig, dataset: &MisoDataset) -> Result<()> {
    if config.output_count != 1 {
        return Err(Error::InvalidConfig(
            "trainers fit single-output networks".into(),
        ));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "cannot train on an empty dataset".into(),
        ));
    }
    if dataset.input_count() != config.input_count {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} inputs, network expects {}",
            dataset.input_count(),
            config.input_count
        )));
    }
    Ok(())
}

/// Mean-squared error of the network over the whole dataset, in sample
/// order.
pub(crate) fn dataset_mse(
    net: &Network,
    dataset: &MisoDataset,
    trace: &mut ForwardTrace,
) -> Result<f64> {
    let mut sum = 0.0;
    for row in dataset.samples() {
        net.forward_into(&row.inputs, trace)?;
        let e = row.target - trace.output();
        sum += e * e;
    }
    Ok(sum / dataset.len() as f64)
}
