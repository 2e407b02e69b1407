//! Per-sample gradient descent with momentum.
//!
//! Each weight moves by the previous change scaled by the momentum
//! constant plus a learning-rate-scaled gradient term:
//!
//! ```text
//! dw_ji(n) = alpha * dw_ji(n-1) + eta * delta_j * y_i
//! ```
//!
//! Updates are applied per sample (pattern mode) in a freshly shuffled
//! order each epoch. The formula is the standard momentum rule on the
//! previous weight CHANGE; the source equations print the momentum term
//! as the previous weight value, which diverges unconditionally and is
//! treated as a typo here.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MisoDataset;
use crate::error::{Error, Result};
use crate::network::{ForwardTrace, Network, NetworkConfig, WeightMatrix};

use super::backprop::{compute_deltas_into, Deltas};
use super::{
    check_training_inputs, dataset_mse, mix_seed, TrainResult, SHUFFLE_STREAM, WEIGHT_STREAM,
};

/// Hyperparameters of the momentum trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumHyperParams {
    /// Learning rate, eta > 0.
    pub eta: f64,
    /// Momentum constant, 0 <= alpha < 1.
    pub alpha: f64,
    pub max_epochs: usize,
    /// Stop once the epoch-to-epoch change in mean-squared error falls
    /// below this.
    pub loss_tolerance: f64,
}

impl Default for MomentumHyperParams {
    fn default() -> Self {
        Self {
            eta: 0.05,
            alpha: 0.9,
            max_epochs: 500,
            loss_tolerance: 1e-9,
        }
    }
}

impl MomentumHyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("alpha must lie in [0, 1)".into()));
        }
        if !(self.loss_tolerance.is_finite() && self.loss_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "loss tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The single-weight momentum update:
/// `alpha * prev_delta + eta * delta * y`.
#[inline]
pub fn momentum_delta(alpha: f64, prev_delta: f64, eta: f64, delta: f64, y: f64) -> f64 {
    alpha * prev_delta + eta * delta * y
}

/// Applies one momentum update for a single sample, returning the
/// updated network and the applied increments (which become the next
/// step's `prev_updates`).
pub fn momentum_step(
    net: &Network,
    deltas: &Deltas,
    trace: &ForwardTrace,
    prev_updates: &[WeightMatrix],
    params: &MomentumHyperParams,
) -> Result<(Network, Vec<WeightMatrix>)> {
    params.validate()?;
    let shapes_ok = prev_updates.len() == net.weights().len()
        && prev_updates
            .iter()
            .zip(net.weights())
            .all(|(p, w)| p.rows() == w.rows() && p.cols() == w.cols());
    if !shapes_ok {
        return Err(Error::ShapeMismatch(
            "prev_updates must be shaped like the weight set".into(),
        ));
    }
    let mut updated = net.clone();
    let mut updates = prev_updates.to_vec();
    apply_momentum_step(
        &mut updated,
        deltas,
        trace,
        &mut updates,
        params.eta,
        params.alpha,
    );
    Ok((updated, updates))
}

/// In-place momentum update; `prev` holds the previous increments on
/// entry and the applied increments on exit.
fn apply_momentum_step(
    net: &mut Network,
    deltas: &Deltas,
    trace: &ForwardTrace,
    prev: &mut [WeightMatrix],
    eta: f64,
    alpha: f64,
) {
    for (l, (weights, prev_l)) in net
        .weights_mut()
        .iter_mut()
        .zip(prev.iter_mut())
        .enumerate()
    {
        let y_prev = trace.layer_output(l);
        for (j, &delta) in deltas.layer(l).iter().enumerate() {
            let w_row = weights.row_mut(j);
            let p_row = prev_l.row_mut(j);
            for i in 0..w_row.len() {
                let upd = momentum_delta(alpha, p_row[i], eta, delta, y_prev[i]);
                w_row[i] += upd;
                p_row[i] = upd;
            }
        }
    }
}

/// Trains a freshly initialized network with per-sample momentum
/// updates. Fully determined by `(config, dataset, params, seed)`.
pub fn train_momentum(
    config: &NetworkConfig,
    dataset: &MisoDataset,
    params: &MomentumHyperParams,
    seed: u64,
) -> Result<TrainResult> {
    params.validate()?;
    check_training_inputs(config, dataset)?;
    let mut net = Network::init(config.clone(), mix_seed(seed, WEIGHT_STREAM))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, SHUFFLE_STREAM));

    let mut trace = ForwardTrace::for_network(&net);
    let mut deltas = Deltas::for_network(&net);
    let mut prev: Vec<WeightMatrix> = net
        .weights()
        .iter()
        .map(|w| WeightMatrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    let mut epoch_losses = Vec::new();
    let mut prev_loss = f64::INFINITY;
    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let row = &dataset.samples()[idx];
            net.forward_into(&row.inputs, &mut trace)?;
            compute_deltas_into(&net, &trace, std::slice::from_ref(&row.target), &mut deltas)?;
            apply_momentum_step(
                &mut net,
                &deltas,
                &trace,
                &mut prev,
                params.eta,
                params.alpha,
            );
        }
        let loss = dataset_mse(&net, dataset, &mut trace)?;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(
                "training diverged to a non-finite loss; reduce eta".into(),
            ));
        }
        epoch_losses.push(loss);
        if (prev_loss - loss).abs() < params.loss_tolerance {
            break;
        }
        prev_loss = loss;
    }

    let final_rmse = dataset_mse(&net, dataset, &mut trace)?.sqrt();
    Ok(TrainResult {
        network: net,
        epochs_run: epoch_losses.len(),
        epoch_losses,
        final_rmse,
        seed,
    })
}
