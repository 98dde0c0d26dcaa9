//! Spectral and prosodic feature extraction.

mod chroma;
mod delta;
mod dct;
mod fft;
mod frame;
mod matrix;
mod mel;
mod prosody;
pub mod serf;

use thiserror::Error;

pub use chroma::{chroma, PITCH_CLASSES};
pub use dct::{dct2_ortho, dct3_ortho};
pub use delta::deltas;
pub use fft::{fft_real, periodogram, FftPlan};
pub use frame::{frame_signal, FrameConfig, FrameGeometry, Frames, WindowFn};
pub use matrix::{stack_features, FeatureKind, FeatureMatrix};
pub use mel::{hz_to_mel, log_mel_spectrogram, make_mel_filterbank, mel_to_hz, mfcc, MelFilterbank, LOG_FLOOR};
pub use prosody::{frame_magnitude, pitch_track, rms_energy, zcr, PitchParams, VOICING_THRESHOLD};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("signal of {len} samples is shorter than one {win}-sample window")]
    TooShort { len: usize, win: usize },
    #[error("FFT size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("{0}")]
    Mismatch(String),
    #[error("feature file format: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;
