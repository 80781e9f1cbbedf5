//! From-scratch convolutional regression network.
//!
//! Two architectures are available: a small fixed four-convolution network
//! (the shakedown model) and a deeper three-block design whose per-block
//! depth is a tuned hyperparameter, with a configurable mix of max and
//! average pooling between blocks. Training is stochastic gradient descent
//! with momentum, L2 regularization on convolution and dense weights, and a
//! stepped learning-rate schedule. Everything is plain f64 with analytic
//! gradients, and fully deterministic given a seed.
//!
//! ```
//! use eqeinv::nn::sgd_step;
//!
//! let mut param = vec![1.0];
//! let mut velocity = vec![0.0];
//! sgd_step(&mut param, &[0.5], &mut velocity, 0.1, 0.9);
//! assert_eq!(velocity, vec![-0.05]); // v = 0.9 * 0 - 0.1 * 0.5
//! assert_eq!(param, vec![0.95]); // param += v
//! ```

pub mod layers;
mod tensor;
mod train;

pub use layers::{LayerOp, Mode};
pub use tensor::Tensor4;
pub use train::{sgd_step, train, EpochStats, TrainConfig};

use std::fmt;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::SplitData;
use crate::sampling::ThicknessBox;
use layers::{AvgPool2, BatchNorm2d, Conv2d, Dense, Dropout, MaxPool2, Relu};

pub mod io;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network config: {0}")]
    BadConfig(String),
    #[error("geometry mismatch: {0}")]
    Geometry(String),
    #[error("non-finite activation leaving layer {index} ({name})")]
    NonFiniteActivation { index: usize, name: &'static str },
    #[error("non-finite gradient leaving layer {index} ({name})")]
    NonFiniteGradient { index: usize, name: &'static str },
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    ModelFormat { path: PathBuf, message: String },
}

/// Pooling flavour used between blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolKind::Max => write!(f, "max"),
            PoolKind::Avg => write!(f, "avg"),
        }
    }
}

/// Network shape selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    /// Four 3x3 convolutions of 8/16/32/32 filters, batch norm + ReLU after
    /// each, average pools after the first two, 20% dropout before the dense
    /// head.
    First,
    /// Three blocks of `section_depth` repetitions of conv 3x3 -> batch norm
    /// -> ReLU, one pool after each block drawn from the multiset
    /// {max, avg, avg}, then a dense head.
    Block {
        section_depth: usize,
        pools: [PoolKind; 3],
        filters: [usize; 3],
    },
}

impl Architecture {
    /// Three-block architecture with the best-found pooling order
    /// (max, avg, avg) and the default filter ramp.
    pub fn block(section_depth: usize) -> Self {
        Architecture::Block {
            section_depth,
            pools: [PoolKind::Max, PoolKind::Avg, PoolKind::Avg],
            filters: [8, 16, 32],
        }
    }
}

/// Everything needed to build a network, minus the seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub output_dim: usize,
    pub arch: Architecture,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.output_dim == 0 || self.input_channels == 0 {
            return Err(NnError::BadConfig(
                "output_dim and input_channels must be >= 1".into(),
            ));
        }
        let pool_count = match &self.arch {
            Architecture::First => 2,
            Architecture::Block {
                section_depth,
                pools,
                filters,
            } => {
                if *section_depth == 0 {
                    return Err(NnError::BadConfig("section_depth must be >= 1".into()));
                }
                if filters.contains(&0) {
                    return Err(NnError::BadConfig("filter counts must be >= 1".into()));
                }
                let max_count = pools.iter().filter(|&&p| p == PoolKind::Max).count();
                if max_count != 1 {
                    return Err(NnError::BadConfig(format!(
                        "block pooling must be a permutation of {{max, avg, avg}}, got [{}, {}, {}]",
                        pools[0], pools[1], pools[2]
                    )));
                }
                3
            }
        };
        if self.input_height >> pool_count == 0 || self.input_width >> pool_count == 0 {
            return Err(NnError::BadConfig(format!(
                "input {}x{} too small for {pool_count} halving pools",
                self.input_height, self.input_width
            )));
        }
        Ok(())
    }
}

/// A built network: ordered layers plus the dropout RNG stream.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetworkConfig,
    layers: Vec<LayerOp>,
    dropout_rng: ChaCha8Rng,
}

impl Network {
    /// Build and seed a network. The seed fixes both the He-style parameter
    /// initialization and the dropout stream.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let (mut c, mut h, mut w) = (
            config.input_channels,
            config.input_height,
            config.input_width,
        );
        let push_conv_bn_relu = |layers: &mut Vec<LayerOp>, c: &mut usize, out_c: usize, rng: &mut ChaCha8Rng| {
            layers.push(LayerOp::Conv(Conv2d::new(*c, out_c, 3, rng)));
            layers.push(LayerOp::BatchNorm(BatchNorm2d::new(out_c)));
            layers.push(LayerOp::Relu(Relu::default()));
            *c = out_c;
        };
        match &config.arch {
            Architecture::First => {
                for (i, &filters) in [8usize, 16, 32, 32].iter().enumerate() {
                    push_conv_bn_relu(&mut layers, &mut c, filters, &mut rng);
                    if i < 2 {
                        layers.push(LayerOp::AvgPool(AvgPool2::default()));
                        h /= 2;
                        w /= 2;
                    }
                }
                layers.push(LayerOp::Dropout(Dropout::new(0.2)));
            }
            Architecture::Block {
                section_depth,
                pools,
                filters,
            } => {
                for (block, &pool) in pools.iter().enumerate() {
                    for _ in 0..*section_depth {
                        push_conv_bn_relu(&mut layers, &mut c, filters[block], &mut rng);
                    }
                    layers.push(match pool {
                        PoolKind::Max => LayerOp::MaxPool(MaxPool2::default()),
                        PoolKind::Avg => LayerOp::AvgPool(AvgPool2::default()),
                    });
                    h /= 2;
                    w /= 2;
                }
            }
        }
        layers.push(LayerOp::Dense(Dense::new(c * h * w, config.output_dim, &mut rng)));
        Ok(Self {
            config: config.clone(),
            layers,
            dropout_rng: rng,
        })
    }

    pub fn layers_mut(&mut self) -> &mut Vec<LayerOp> {
        &mut self.layers
    }

    pub fn layers(&self) -> &[LayerOp] {
        &self.layers
    }

    /// Run the batch through every layer. Output is `(n, output_dim, 1, 1)`,
    /// the linear dense output (normalized-thickness predictions).
    pub fn forward(&mut self, batch: &Tensor4, mode: Mode) -> Result<Tensor4, NnError> {
        if batch.c != self.config.input_channels
            || batch.h != self.config.input_height
            || batch.w != self.config.input_width
        {
            return Err(NnError::Geometry(format!(
                "network expects {}x{}x{} inputs, got {}x{}x{}",
                self.config.input_channels,
                self.config.input_height,
                self.config.input_width,
                batch.c,
                batch.h,
                batch.w
            )));
        }
        let mut current = batch.clone();
        for (index, layer) in self.layers.iter_mut().enumerate() {
            current = layer.forward(&current, mode, &mut self.dropout_rng)?;
            if !current.is_finite() {
                return Err(NnError::NonFiniteActivation {
                    index,
                    name: layer.name(),
                });
            }
        }
        Ok(current)
    }

    /// Backpropagate from the loss gradient at the network output; fills
    /// every layer's parameter gradients and returns the input gradient.
    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let mut current = dout.clone();
        for (index, layer) in self.layers.iter_mut().enumerate().rev() {
            current = layer.backward(&current)?;
            if !current.is_finite() {
                return Err(NnError::NonFiniteGradient {
                    index,
                    name: layer.name(),
                });
            }
        }
        Ok(current)
    }

    /// Sum of squared conv and dense weights (the L2 term before its
    /// coefficient).
    pub fn weight_square_sum(&mut self) -> f64 {
        self.layers
            .iter_mut()
            .flat_map(|l| l.learnables())
            .filter(|(_, _, is_weight)| *is_weight)
            .map(|(p, _, _)| p.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Mean-squared error over batch and output dims, plus its gradient with
/// respect to the predictions.
pub fn mse_loss(preds: &Tensor4, targets: &[Vec<f64>]) -> Result<(f64, Tensor4), NnError> {
    let dim = preds.c;
    if preds.n != targets.len() || targets.iter().any(|t| t.len() != dim) {
        return Err(NnError::Geometry(format!(
            "loss got {} predictions of dim {dim} against {} targets",
            preds.n,
            targets.len()
        )));
    }
    let scale = 1.0 / (preds.n * dim) as f64;
    let mut grad = Tensor4::zeros(preds.n, dim, 1, 1);
    let mut loss = 0.0;
    for (n, target) in targets.iter().enumerate() {
        for (d, &t) in target.iter().enumerate() {
            let e = preds.data[n * dim + d] - t;
            loss += e * e * scale;
            grad.data[n * dim + d] = 2.0 * e * scale;
        }
    }
    Ok((loss, grad))
}

/// Images plus normalized targets, ready for the trainer.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub inputs: Tensor4,
    pub targets: Vec<Vec<f64>>,
}

impl RegressionData {
    pub fn new(inputs: Tensor4, targets: Vec<Vec<f64>>) -> Result<Self, NnError> {
        if inputs.n != targets.len() {
            return Err(NnError::Geometry(format!(
                "{} images vs {} target rows",
                inputs.n,
                targets.len()
            )));
        }
        Ok(Self { inputs, targets })
    }

    /// Lift a loaded dataset split into training form.
    pub fn from_split(split: &SplitData) -> Result<Self, NnError> {
        let p = &split.images;
        let inputs = Tensor4::from_data(
            p.count,
            p.channels,
            p.height,
            p.width,
            p.data.iter().map(|&v| v as f64).collect(),
        );
        Self::new(inputs, split.targets.clone())
    }

    pub fn len(&self) -> usize {
        self.inputs.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy a subset of records in the given index order.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let len = self.inputs.sample_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.inputs.sample(i));
            targets.push(self.targets[i].clone());
        }
        Self {
            inputs: Tensor4::from_data(indices.len(), self.inputs.c, self.inputs.h, self.inputs.w, data),
            targets,
        }
    }
}

/// A trained network together with the thickness box that defines its
/// denormalization and the per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub box_: ThicknessBox,
    pub history: Vec<EpochStats>,
}

impl TrainedModel {
    /// Predict thicknesses in nm for a batch of images.
    pub fn predict(&mut self, images: &Tensor4) -> Result<Vec<Vec<f64>>, NnError> {
        let preds = self.network.forward(images, Mode::Infer)?;
        preds
            .to_rows()
            .into_iter()
            .map(|row| {
                crate::dataset::denormalize_targets(&row, &self.box_)
                    .map_err(|e| NnError::Geometry(e.to_string()))
            })
            .collect()
    }

    /// Predict in batches to bound memory; output order matches input order.
    pub fn predict_batched(&mut self, images: &Tensor4, batch: usize) -> Result<Vec<Vec<f64>>, NnError> {
        let mut out = Vec::with_capacity(images.n);
        let mut start = 0;
        while start < images.n {
            let stop = (start + batch).min(images.n);
            let indices: Vec<usize> = (start..stop).collect();
            let len = images.sample_len();
            let mut data = Vec::with_capacity(indices.len() * len);
            for &i in &indices {
                data.extend_from_slice(images.sample(i));
            }
            let chunk = Tensor4::from_data(indices.len(), images.c, images.h, images.w, data);
            out.extend(self.predict(&chunk)?);
            start = stop;
        }
        Ok(out)
    }
}
