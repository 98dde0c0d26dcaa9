//! Tensors, layers with hand-derived gradients, SGD/Adam, model builders,
//! training with validation checkpointing, and model files.

mod gradcheck;
mod io;
mod network;
mod ops;
mod optim;
mod spec;
mod tensor;
mod train;


use thiserror::Error;

pub use gradcheck::{grad_check, numeric_gradient, GradCheckReport};
pub use io::{load_model, read_model, save_model, write_model, ModelFile, SERC_MAGIC, SERC_VERSION};
pub use network::{argmax, Network};
pub use ops::{
    conv1d_backward, conv1d_forward, conv2d_backward, conv2d_forward, dense, dense_backward, global_avg_pool,
    global_avg_pool_backward, maxpool2d, maxpool2d_backward, relu, relu_backward, softmax, softmax_cross_entropy,
    ConvGrads,
};
pub use optim::{Optimizer, OptimizerConfig};
pub use spec::{build_champion_cnn, build_cnn1d, build_dnn, build_shallow_cnn, LayerSpec, ModelSpec};
pub use tensor::{Real, Tensor};
pub use train::{accuracy, fit, predict_batch, train, EpochStats, Example, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("model spec: {0}")]
    Spec(String),
    #[error("training config: {0}")]
    Config(String),
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("non-finite loss or parameters at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
