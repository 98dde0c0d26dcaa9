//! Gaussian and GMM-emission hidden Markov models, Baum–Welch training and
//! per-class maximum-likelihood classification.

mod classifier;
mod model;
mod train;

use thiserror::Error;

pub use classifier::{train_classifier, HmmClassifier, HMM_FORMAT_VERSION};
pub use model::{forward_loglik, GaussianHmm, GmmHmm, HmmModel, SequenceModel, Topology};
pub use train::{baum_welch_fit, FitConfig, FitResult};

/// Lower bound on every emission variance.
pub const VAR_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("no training sequences")]
    Empty,
    #[error("observation has {got} dims, model expects {expected}")]
    Dims { expected: usize, got: usize },
    #[error("sequence of {frames} frames is shorter than {n_states} states")]
    TooShort { frames: usize, n_states: usize },
    #[error("label '{label}' has no training sequences")]
    NoData { label: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T, E = HmmError> = std::result::Result<T, E>;

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
