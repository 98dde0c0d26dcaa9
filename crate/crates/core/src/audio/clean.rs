use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    estimate_noise, resample_linear, spectral_subtract, trim_silence, wiener_filter, AudioError, Result, Waveform,
    DEFAULT_TRIM_DB,
};
use crate::features::FrameConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denoiser {
    #[default]
    None,
    Wiener,
    SpectralSubtraction,
}

/// Cleaning chain applied in order: resample, trim, denoise, fix length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub target_sample_rate: Option<u32>,
    pub trim: bool,
    pub trim_threshold_db: f64,
    pub denoise: Denoiser,
    pub frame: FrameConfig,
    pub fix_length_s: Option<f64>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            target_sample_rate: Some(16000),
            trim: true,
            trim_threshold_db: DEFAULT_TRIM_DB,
            denoise: Denoiser::None,
            frame: FrameConfig::cleaning_default(),
            fix_length_s: None,
        }
    }
}

impl CleaningConfig {
    /// No resampling, trimming, denoising or length fixing.
    pub fn passthrough() -> Self {
        CleaningConfig {
            target_sample_rate: None,
            trim: false,
            denoise: Denoiser::None,
            fix_length_s: None,
            ..Default::default()
        }
    }
}

pub fn clean(w: &Waveform, cfg: &CleaningConfig) -> Result<Waveform> {
    let mut out = match cfg.target_sample_rate {
        Some(sr) if sr != w.sample_rate => resample_linear(w, sr)?,
        _ => w.clone(),
    };
    if cfg.trim {
        out = trim_silence(&out, cfg.trim_threshold_db)?;
    }
    if cfg.denoise != Denoiser::None {
        match estimate_noise(&out, &cfg.frame) {
            Ok(profile) => {
                out = match cfg.denoise {
                    Denoiser::Wiener => wiener_filter(&out, &profile, &cfg.frame)?,
                    Denoiser::SpectralSubtraction => spectral_subtract(&out, &profile, &cfg.frame)?,
                    Denoiser::None => unreachable!(),
                };
            }
            Err(AudioError::Estimation(reason)) => {
                warn!("skipping denoise: {reason}");
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(s) = cfg.fix_length_s {
        out = fix_length(&out, s)?;
    }
    Ok(out)
}

/// Truncate or zero-pad at the end to `round(seconds × sr)` samples.
pub fn fix_length(w: &Waveform, seconds: f64) -> Result<Waveform> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(AudioError::Invalid(format!("target length must be positive, got {seconds}s")));
    }
    let n = (seconds * w.sample_rate as f64).round() as usize;
    let mut samples = w.samples.clone();
    samples.resize(n, 0.0);
    Waveform::new(samples, w.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, sr: u32) -> Waveform {
        Waveform::new(
            (0..n).map(|i| (0.3 * (i as f64 * 0.05).sin()) as f32).collect(),
            sr,
        )
        .unwrap()
    }

    #[test]
    fn fix_length_pads_and_truncates() {
        let w = tone(1000, 1000);
        let short = fix_length(&w, 0.5).unwrap();
        assert_eq!(short.samples, w.samples[..500]);
        let long = fix_length(&w, 1.5).unwrap();
        assert_eq!(long.len(), 1500);
        assert_eq!(long.samples[..1000], w.samples[..]);
        assert!(long.samples[1000..].iter().all(|&s| s == 0.0));
        assert!(fix_length(&w, 0.0).is_err());
    }

    #[test]
    fn passthrough_is_identity() {
        let w = tone(4000, 8000);
        assert_eq!(clean(&w, &CleaningConfig::passthrough()).unwrap(), w);
    }

    #[test]
    fn chain_order() {
        let mut samples = vec![0.0f32; 8000];
        samples.extend(tone(16000, 16000).samples);
        samples.extend(vec![0.0f32; 8000]);
        let w = Waveform::new(samples, 16000).unwrap();
        let cfg = CleaningConfig {
            target_sample_rate: Some(8000),
            fix_length_s: Some(1.25),
            ..Default::default()
        };
        let out = clean(&w, &cfg).unwrap();
        assert_eq!(out.sample_rate, 8000);
        assert_eq!(out.len(), 10000);
        // trimmed speech (~1 s) followed by zero padding
        assert!(out.samples[9000..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn short_input_skips_denoise() {
        let w = tone(800, 16000);
        let cfg = CleaningConfig {
            trim: false,
            denoise: Denoiser::Wiener,
            ..Default::default()
        };
        assert_eq!(clean(&w, &cfg).unwrap(), w);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = CleaningConfig {
            denoise: Denoiser::SpectralSubtraction,
            fix_length_s: Some(3.0),
            ..Default::default()
        };
        let s = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<CleaningConfig>(&s).unwrap(), cfg);
        let partial: CleaningConfig = toml::from_str("denoise = \"wiener\"").unwrap();
        assert_eq!(partial.denoise, Denoiser::Wiener);
        assert_eq!(partial.target_sample_rate, Some(16000));
    }
}
