//! Batch Levenberg-Marquardt trainer.
//!
//! Per epoch: build the Jacobian J of the network output with respect to
//! every weight (one row per sample, via the same delta recursion as
//! backpropagation but seeded with 1 instead of the error), then solve
//! the damped normal equations
//!
//! ```text
//! (J^T J + lambda I) dw = J^T e
//! ```
//!
//! with residuals `e = d - o`. A trial step is accepted when it does not
//! increase the batch mean-squared error; lambda shrinks on acceptance
//! and grows on rejection, so the method blends between Gauss-Newton and
//! small gradient steps. `J^T J` is accumulated chunk-wise so the `n x w`
//! Jacobian never materializes for large corpora; each chunk is
//! transposed into a scratch buffer first because the plain `gemm`
//! product runs an order of magnitude faster than `gemm_tr` here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::MisoDataset;
use crate::error::{Error, Result};
use crate::network::{ForwardTrace, Network, NetworkConfig};

use super::backprop::{output_jacobian_row_into, Deltas};
use super::{check_training_inputs, dataset_mse, mix_seed, TrainResult, WEIGHT_STREAM};

/// Rows accumulated per matrix-multiply flush. Large enough that the
/// blocked multiply reaches full speed, small enough that the chunk and
/// its transpose stay a few megabytes even at 800 weights.
const CHUNK_ROWS: usize = 512;

/// Hyperparameters of the Levenberg-Marquardt trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmHyperParams {
    /// Initial damping.
    pub lambda0: f64,
    /// Factor applied on rejected steps (> 1).
    pub lambda_increase: f64,
    /// Factor applied on accepted steps (< 1).
    pub lambda_decrease: f64,
    pub max_epochs: usize,
    /// Stop once the per-epoch improvement in mean-squared error falls
    /// below this.
    pub loss_tolerance: f64,
    /// Treat the run as finished (or failed, if the solver cannot
    /// factor) once lambda exceeds this cap.
    pub max_lambda: f64,
}

impl Default for LmHyperParams {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_increase: 10.0,
            lambda_decrease: 0.1,
            max_epochs: 500,
            loss_tolerance: 1e-9,
            max_lambda: 1e10,
        }
    }
}

impl LmHyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(Error::InvalidConfig("lambda0 must be positive".into()));
        }
        if !(self.lambda_increase.is_finite() && self.lambda_increase > 1.0) {
            return Err(Error::InvalidConfig("lambda_increase must exceed 1".into()));
        }
        if !(self.lambda_decrease > 0.0 && self.lambda_decrease < 1.0) {
            return Err(Error::InvalidConfig(
                "lambda_decrease must lie in (0, 1)".into(),
            ));
        }
        if !(self.loss_tolerance.is_finite() && self.loss_tolerance >= 0.0) {
            return Err(Error::InvalidConfig(
                "loss tolerance must be non-negative".into(),
            ));
        }
        if self.max_lambda.is_nan() || self.max_lambda < self.lambda0 {
            return Err(Error::InvalidConfig(
                "max_lambda must be at least lambda0".into(),
            ));
        }
        Ok(())
    }
}

/// Trains a freshly initialized network with batch Levenberg-Marquardt.
/// Weight initialization uses the same seed stream as the momentum
/// trainer, so paired comparisons start from identical weights.
pub fn train_levenberg_marquardt(
    config: &NetworkConfig,
    dataset: &MisoDataset,
    params: &LmHyperParams,
    seed: u64,
) -> Result<TrainResult> {
    let net = Network::init(config.clone(), mix_seed(seed, WEIGHT_STREAM))?;
    let mut result = fit_levenberg_marquardt(net, dataset, params)?;
    result.seed = seed;
    Ok(result)
}

/// Runs Levenberg-Marquardt from an explicit starting network. The
/// result's `seed` field is 0; [`train_levenberg_marquardt`] overwrites
/// it with the caller's seed.
pub fn fit_levenberg_marquardt(
    mut net: Network,
    dataset: &MisoDataset,
    params: &LmHyperParams,
) -> Result<TrainResult> {
    params.validate()?;
    check_training_inputs(net.config(), dataset)?;

    let w_count = net.weight_count();
    let mut trace = ForwardTrace::for_network(&net);
    let mut deltas = Deltas::for_network(&net);
    let mut row_buf = Vec::with_capacity(w_count);

    let mut jtj = DMatrix::<f64>::zeros(w_count, w_count);
    let mut jte = DVector::<f64>::zeros(w_count);
    let mut chunk = DMatrix::<f64>::zeros(CHUNK_ROWS, w_count);
    let mut chunk_t = DMatrix::<f64>::zeros(w_count, CHUNK_ROWS);
    let mut resid = DVector::<f64>::zeros(CHUNK_ROWS);

    let mut flat = net.flat_weights();
    let mut trial_flat = vec![0.0; w_count];
    let mut trial_net = net.clone();

    let mut e0 = dataset_mse(&net, dataset, &mut trace)?;
    if !e0.is_finite() {
        return Err(Error::NumericalFailure(
            "initial loss is non-finite; check the starting weights".into(),
        ));
    }
    let mut lambda = params.lambda0;
    let mut epoch_losses = Vec::new();

    'epochs: for _ in 0..params.max_epochs {
        jtj.fill(0.0);
        jte.fill(0.0);
        let mut filled = 0;
        for row in dataset.samples() {
            net.forward_into(&row.inputs, &mut trace)?;
            output_jacobian_row_into(&net, &trace, &mut deltas, &mut row_buf)?;
            for (c, v) in row_buf.iter().enumerate() {
                chunk[(filled, c)] = *v;
            }
            resid[filled] = row.target - trace.output();
            filled += 1;
            if filled == CHUNK_ROWS {
                chunk.transpose_to(&mut chunk_t);
                jtj.gemm(1.0, &chunk_t, &chunk, 1.0);
                jte.gemv(1.0, &chunk_t, &resid, 1.0);
                filled = 0;
            }
        }
        if filled > 0 {
            let rows = chunk.rows(0, filled);
            let mut cols = chunk_t.columns_mut(0, filled);
            rows.transpose_to(&mut cols);
            let cols = chunk_t.columns(0, filled);
            jtj.gemm(1.0, &cols, &rows, 1.0);
            jte.gemv(1.0, &cols, &resid.rows(0, filled), 1.0);
        }

        let e_before = e0;
        let mut accepted = false;
        loop {
            let mut damped = jtj.clone();
            for i in 0..w_count {
                damped[(i, i)] += lambda;
            }
            match damped.cholesky() {
                Some(factor) => {
                    let dw = factor.solve(&jte);
                    for k in 0..w_count {
                        trial_flat[k] = flat[k] + dw[k];
                    }
                    trial_net.assign_flat_weights(&trial_flat)?;
                    let e1 = dataset_mse(&trial_net, dataset, &mut trace)?;
                    if e1.is_finite() && e1 <= e0 {
                        flat.copy_from_slice(&trial_flat);
                        net.assign_flat_weights(&flat)?;
                        e0 = e1;
                        // Keep lambda away from exact zero so a later
                        // escalation can always recover.
                        lambda = (lambda * params.lambda_decrease).max(f64::MIN_POSITIVE);
                        accepted = true;
                        break;
                    }
                    lambda *= params.lambda_increase;
                    if lambda > params.max_lambda {
                        break;
                    }
                }
                None => {
                    lambda *= params.lambda_increase;
                    if lambda > params.max_lambda {
                        return Err(Error::NumericalFailure(format!(
                            "(J^T J + lambda I) not factorizable up to lambda = {lambda:e}"
                        )));
                    }
                }
            }
        }

        epoch_losses.push(e0);
        if !accepted {
            // Damping cap reached through rejections: a normal stop.
            break 'epochs;
        }
        if e_before - e0 < params.loss_tolerance {
            break 'epochs;
        }
    }

    let final_rmse = e0.sqrt();
    Ok(TrainResult {
        network: net,
        epochs_run: epoch_losses.len(),
        epoch_losses,
        final_rmse,
        seed: 0,
    })
}
