//! Speech emotion recognition toolkit: corpus handling, audio cleaning,
//! feature extraction, HMM and neural classifiers, and an experiment harness.

pub mod audio;
pub mod corpus;
pub mod features;
pub mod harness;
pub mod hmm;
pub mod nn;
pub mod seed;

pub use audio::{AudioError, CleaningConfig, Denoiser, Waveform};
pub use corpus::{Emotion, Gender, Intensity, LabelScheme, SchemeKind, Utterance};
pub use features::{FeatureKind, FeatureMatrix, FrameConfig};
pub use hmm::{GaussianHmm, GmmHmm, HmmClassifier, HmmModel};
