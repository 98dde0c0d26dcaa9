use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::FeatureSpec;
use super::synthetic::SyntheticConfig;
use super::{AtStage, HarnessError, Result, Stage};
use crate::audio::CleaningConfig;
use crate::corpus::{SchemeKind, SplitSpec};
use crate::hmm::Topology;
use crate::nn::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// A RAVDESS-style directory tree, split by actor.
    #[default]
    Ravdess,
    /// The in-memory synthetic corpus; `root` is ignored.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: CorpusSource,
    pub root: PathBuf,
    pub scheme: SchemeKind,
    /// Keep only audio-only speech recordings.
    pub speech_only: bool,
    /// Drop classes with no training examples and renumber the rest.
    pub present_classes_only: bool,
    pub split: SplitSpec,
    /// Labeled CSV manifest evaluated as an extra, external test set.
    pub external_manifest: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            source: CorpusSource::Ravdess,
            root: PathBuf::from("data/ravdess"),
            scheme: SchemeKind::GenderEmotion14,
            speech_only: true,
            present_classes_only: false,
            split: SplitSpec::default(),
            external_manifest: None,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[default]
    ChampionCnn,
    ShallowCnn,
    Cnn1d,
    Dnn,
    Hmm,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::ChampionCnn => "champion_cnn",
            ModelFamily::ShallowCnn => "shallow_cnn",
            ModelFamily::Cnn1d => "cnn1d",
            ModelFamily::Dnn => "dnn",
            ModelFamily::Hmm => "hmm",
        }
    }
}

/// HMM settings. Every (n_states, n_components) pair is fitted and the one
/// with the best validation accuracy is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmSearch {
    pub n_states: Vec<usize>,
    pub n_components: Vec<usize>,
    pub topology: Topology,
    pub max_iter: usize,
    pub tol: f64,
    pub var_floor: f64,
}

impl Default for HmmSearch {
    fn default() -> Self {
        HmmSearch {
            n_states: vec![3, 5, 8],
            n_components: vec![1, 2, 4],
            topology: Topology::Ergodic,
            max_iter: 50,
            tol: 1e-4,
            var_floor: crate::hmm::VAR_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub hmm: HmmSearch,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: ModelFamily::ChampionCnn,
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerConfig::adam(1e-3),
            hmm: HmmSearch::default(),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub corpus: CorpusConfig,
    pub cleaning: CleaningConfig,
    pub features: FeatureSpec,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 42,
            output_dir: PathBuf::from("runs/experiment"),
            cache_dir: None,
            corpus: CorpusConfig::default(),
            cleaning: CleaningConfig::default(),
            features: FeatureSpec::default(),
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).at(Stage::Config)?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at_ctx(Stage::Config, path.display())?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| HarnessError::new(Stage::Config, format!("{}: {}", path.display(), e.message)))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).at(Stage::Config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.corpus.root);
        if let Some(p) = self.cache_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.corpus.external_manifest.as_mut() {
            fix(p);
        }
    }

    pub fn cache_root(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::new(Stage::Config, m));
        self.corpus.split.validate().at(Stage::Config)?;
        if self.model.family == ModelFamily::Hmm {
            let h = &self.model.hmm;
            if h.n_states.is_empty() || h.n_components.is_empty() {
                return bad("hmm.n_states and hmm.n_components must be non-empty".into());
            }
            if h.n_states.contains(&0) || h.n_components.contains(&0) {
                return bad("hmm grid values must be ≥ 1".into());
            }
        } else {
            if self.model.epochs == 0 || self.model.batch_size == 0 {
                return bad("model.epochs and model.batch_size must be ≥ 1".into());
            }
            self.model.optimizer.validate().at(Stage::Config)?;
        }
        let f = &self.features;
        if f.n_mels == 0 || f.n_mfcc == 0 || f.mfcc_mels == 0 || f.delta_width == 0 {
            return bad("feature sizes must be ≥ 1".into());
        }
        if f.n_mfcc > f.mfcc_mels {
            return bad(format!("n_mfcc {} exceeds mfcc_mels {}", f.n_mfcc, f.mfcc_mels));
        }
        Ok(())
    }

    /// The settings that determine results; paths are left out so a config
    /// moved to another directory hashes the same.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            seed: u64,
            source: CorpusSource,
            scheme: SchemeKind,
            speech_only: bool,
            present_classes_only: bool,
            split: &'a SplitSpec,
            synthetic: &'a SyntheticConfig,
            cleaning: &'a CleaningConfig,
            features: &'a FeatureSpec,
            model: &'a ModelConfig,
        }
        super::pipeline::stable_hash(&View {
            seed: self.seed,
            source: self.corpus.source,
            scheme: self.corpus.scheme,
            speech_only: self.corpus.speech_only,
            present_classes_only: self.corpus.present_classes_only,
            split: &self.corpus.split,
            synthetic: &self.corpus.synthetic,
            cleaning: &self.cleaning,
            features: &self.features,
            model: &self.model,
        })
    }
}
