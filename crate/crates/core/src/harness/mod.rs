//! Evaluation metrics and experiment orchestration: corpus → cleaning →
//! features → model → report.

mod config;
mod experiment;
mod metrics;
mod pipeline;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{CorpusConfig, CorpusSource, ExperimentConfig, HmmSearch, ModelConfig, ModelFamily};
pub use experiment::{
    build_dataset, evaluate_model, featurize, predict_file, run_experiment, run_grid, Dataset, ExperimentReport,
    Features, HmmGridPoint, Item, ItemSource, ModelMeta,
};
pub use metrics::{accuracy, confusion, macro_f1, per_class, predicted_class, top_k_accuracy, EvalReport};
pub use pipeline::{extract, stable_hash, FeatureCache, FeatureSet, FeatureSpec, InputLayout, Normalizer};
pub use synthetic::{generate_synthetic, write_synthetic_corpus, SyntheticConfig, SyntheticUtterance, SYNTHETIC_EMOTIONS};

/// Pipeline stage, used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Clean,
    Featurize,
    Train,
    Eval,
    Predict,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Clean => "clean",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Predict => "predict",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct HarnessError {
    pub stage: Stage,
    pub message: String,
}

impl HarnessError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        HarnessError {
            stage,
            message: message.into(),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Tag any displayable error with the stage it came from.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
    fn at_ctx(self, stage: Stage, ctx: impl fmt::Display) -> Result<T>;
}

impl<T, E: fmt::Display> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| HarnessError::new(stage, e.to_string()))
    }

    fn at_ctx(self, stage: Stage, ctx: impl fmt::Display) -> Result<T> {
        self.map_err(|e| HarnessError::new(stage, format!("{ctx}: {e}")))
    }
}
