//! SGD-with-momentum training loop with a stepped learning-rate schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mse_loss, Mode, Network, NetworkConfig, NnError, RegressionData, TrainedModel};
use crate::dataset::denormalize_targets;
use crate::eval::{overall_rmse, rmse_per_layer};
use crate::sampling::ThicknessBox;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_learning_rate: f64,
    pub momentum: f64,
    pub mini_batch_size: usize,
    /// Learning rate multiplier applied every `lr_drop_period` epochs.
    pub lr_drop_factor: f64,
    pub lr_drop_period: usize,
    pub l2_coefficient: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, train_len: usize) -> Result<(), NnError> {
        let positive = [
            ("initial_learning_rate", self.initial_learning_rate),
            ("lr_drop_factor", self.lr_drop_factor),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(NnError::BadConfig(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::BadConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.lr_drop_factor > 1.0 {
            return Err(NnError::BadConfig(format!(
                "lr_drop_factor must be <= 1, got {}",
                self.lr_drop_factor
            )));
        }
        if self.l2_coefficient < 0.0 || !self.l2_coefficient.is_finite() {
            return Err(NnError::BadConfig(format!(
                "l2_coefficient must be finite and >= 0, got {}",
                self.l2_coefficient
            )));
        }
        if self.lr_drop_period == 0 || self.epochs == 0 {
            return Err(NnError::BadConfig(
                "lr_drop_period and epochs must be >= 1".into(),
            ));
        }
        if self.mini_batch_size == 0 || self.mini_batch_size > train_len {
            return Err(NnError::BadConfig(format!(
                "mini_batch_size must be in 1..={train_len}, got {}",
                self.mini_batch_size
            )));
        }
        Ok(())
    }
}

/// One SGD-with-momentum update:
/// `v <- momentum * v - lr * grad; param <- param + v`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), velocity.len());
    for i in 0..params.len() {
        velocity[i] = momentum * velocity[i] - lr * grads[i];
        params[i] += velocity[i];
    }
}

/// Per-epoch record kept in the model history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_mse: f64,
    pub val_overall_rmse_normalized: f64,
    pub val_overall_rmse_nm: f64,
}

/// Train a fresh network.
///
/// Mini-batches are drawn from a seeded shuffle each epoch (a trailing
/// partial batch is kept), the learning rate is multiplied by
/// `lr_drop_factor` every `lr_drop_period` epochs, and the history records
/// the mean per-batch data MSE plus the validation overall RMSE in both
/// normalized units and nm. Identical configs and seeds give bitwise
/// identical models and histories regardless of thread count.
pub fn train(
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
    train_data: &RegressionData,
    val_data: &RegressionData,
    box_: &ThicknessBox,
) -> Result<TrainedModel, NnError> {
    if train_data.is_empty() || val_data.is_empty() {
        return Err(NnError::BadConfig("training and validation sets must be nonempty".into()));
    }
    train_config.validate(train_data.len())?;
    let mut network = Network::init(net_config, train_config.seed)?;
    // Distinct stream from init/dropout so epoch shuffles cannot collide
    // with parameter draws.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_config.seed.wrapping_add(1));

    let mut velocities: Vec<Vec<f64>> = network
        .layers_mut()
        .iter_mut()
        .flat_map(|l| l.learnables())
        .map(|(p, _, _)| vec![0.0; p.len()])
        .collect();

    let mut history = Vec::with_capacity(train_config.epochs);
    let mut indices: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..train_config.epochs {
        let lr = train_config.initial_learning_rate
            * train_config
                .lr_drop_factor
                .powi((epoch / train_config.lr_drop_period) as i32);
        indices.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for (batch_idx, batch_indices) in indices.chunks(train_config.mini_batch_size).enumerate() {
            let batch = train_data.gather(batch_indices);
            let preds = network.forward(&batch.inputs, Mode::Train)?;
            let (loss, dpreds) = mse_loss(&preds, &batch.targets)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += loss * batch_indices.len() as f64;
            network.backward(&dpreds)?;

            let l2 = train_config.l2_coefficient;
            let mut slot = 0;
            for layer in network.layers_mut().iter_mut() {
                for (param, grad, is_weight) in layer.learnables() {
                    if l2 > 0.0 && is_weight {
                        for (g, &p) in grad.iter_mut().zip(param.iter()) {
                            *g += 2.0 * l2 * p;
                        }
                    }
                    sgd_step(param, grad, &mut velocities[slot], lr, train_config.momentum);
                    slot += 1;
                }
            }
        }

        let (val_norm, val_nm) = validate(&mut network, val_data, box_)?;
        history.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_mse: loss_sum / train_data.len() as f64,
            val_overall_rmse_normalized: val_norm,
            val_overall_rmse_nm: val_nm,
        });
    }

    Ok(TrainedModel {
        network,
        box_: box_.clone(),
        history,
    })
}

/// Validation overall RMSE in normalized units and nm.
fn validate(
    network: &mut Network,
    val_data: &RegressionData,
    box_: &ThicknessBox,
) -> Result<(f64, f64), NnError> {
    let eval_batch = 256usize;
    let mut preds_norm: Vec<Vec<f64>> = Vec::with_capacity(val_data.len());
    let mut start = 0;
    while start < val_data.len() {
        let stop = (start + eval_batch).min(val_data.len());
        let chunk: Vec<usize> = (start..stop).collect();
        let batch = val_data.gather(&chunk);
        let out = network.forward(&batch.inputs, Mode::Infer)?;
        preds_norm.extend(out.to_rows());
        start = stop;
    }
    let to_nm = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>, NnError> {
        rows.iter()
            .map(|r| denormalize_targets(r, box_).map_err(|e| NnError::Geometry(e.to_string())))
            .collect()
    };
    let wrap = |e: crate::eval::EvalError| NnError::Geometry(e.to_string());
    let per_layer_norm = rmse_per_layer(&preds_norm, &val_data.targets).map_err(wrap)?;
    let preds_nm = to_nm(&preds_norm)?;
    let truths_nm = to_nm(&val_data.targets)?;
    let per_layer_nm = rmse_per_layer(&preds_nm, &truths_nm).map_err(wrap)?;
    Ok((overall_rmse(&per_layer_norm), overall_rmse(&per_layer_nm)))
}
