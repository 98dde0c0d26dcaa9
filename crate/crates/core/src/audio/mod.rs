//! Waveforms, WAV I/O and the cleaning chain (trim, denoise, fix length).

mod clean;
mod denoise;
mod resample;
mod trim;
mod wav;

use thiserror::Error;

pub use clean::{clean, fix_length, CleaningConfig, Denoiser};
pub use denoise::{estimate_noise, spectral_subtract, wiener_filter, NoiseProfile, SPECTRAL_FLOOR};
pub use resample::resample_linear;
pub use trim::{trim_silence, DEFAULT_TRIM_DB};
pub use wav::{read_wav, write_wav_pcm16};

use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("decode {path}: {reason}")]
    Decode { path: String, reason: String },
    #[error("encode {path}: {reason}")]
    Encode { path: String, reason: String },
    #[error("invalid waveform: {0}")]
    Invalid(String),
    #[error("noise estimation: {0}")]
    Estimation(String),
    #[error("configuration mismatch: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

pub type Result<T, E = AudioError> = std::result::Result<T, E>;

/// Mono samples in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::Invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}
