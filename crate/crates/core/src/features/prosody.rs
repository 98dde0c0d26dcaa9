//! Scalar per-frame tracks: pitch, RMS energy, mean magnitude, zero-crossing rate.

use serde::{Deserialize, Serialize};

use super::frame::frame_samples;
use super::{FeatureKind, FeatureMatrix, FrameConfig, Frames, Result, WindowFn};
use crate::audio::Waveform;

/// Normalized autocorrelation peaks below this are reported unvoiced (0 Hz).
pub const VOICING_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchParams {
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for PitchParams {
    fn default() -> Self {
        PitchParams { fmin: 50.0, fmax: 400.0 }
    }
}

fn raw_frames(w: &Waveform, cfg: &FrameConfig) -> Result<Frames> {
    let g = cfg.geometry(w.sample_rate)?;
    frame_samples(&w.samples, &g, WindowFn::Rectangular)
}

fn scalar_track(
    kind: FeatureKind,
    label: &str,
    cfg: &FrameConfig,
    values: Vec<f64>,
) -> Result<FeatureMatrix> {
    let n = values.len();
    Ok(FeatureMatrix::new(kind, *cfg, n, 1, values)?.with_labels(vec![label.to_string()]))
}

fn normalized_autocorr(x: &[f64], lag: usize) -> f64 {
    if lag >= x.len() {
        return 0.0;
    }
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let mut num = 0.0;
    let mut ea = 0.0;
    let mut eb = 0.0;
    for (&u, &v) in a.iter().zip(b) {
        num += u * v;
        ea += u * u;
        eb += v * v;
    }
    let den = (ea * eb).sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn frame_pitch(frame: &[f64], sample_rate: f64, p: &PitchParams) -> f64 {
    let period_max = sample_rate / p.fmin;
    if (frame.len() as f64) < period_max {
        return 0.0;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let lag_min = ((sample_rate / p.fmax).floor() as usize).max(2);
    let lag_max = (period_max.ceil() as usize).min(x.len() - 2);
    if lag_min >= lag_max {
        return 0.0;
    }
    // r[i] holds lag lag_min - 1 + i so every searched lag has both neighbours
    let r: Vec<f64> = (lag_min - 1..=lag_max + 1)
        .map(|lag| normalized_autocorr(&x, lag))
        .collect();
    let peak = r[1..r.len() - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak >= VOICING_THRESHOLD) {
        return 0.0;
    }
    // the first local maximum close to the global one avoids octave-down errors
    let i = (1..r.len() - 1)
        .find(|&i| r[i] >= 0.9 * peak && r[i] >= r[i - 1] && r[i] >= r[i + 1])
        .unwrap_or(1);
    let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
    let curve = a - 2.0 * b + c;
    let shift = if curve.abs() > 1e-12 {
        (0.5 * (a - c) / curve).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let lag = (lag_min - 1 + i) as f64 + shift;
    sample_rate / lag
}

/// Autocorrelation pitch estimate per frame, 0 for unvoiced frames.
pub fn pitch_track(w: &Waveform, cfg: &FrameConfig, params: PitchParams) -> Result<FeatureMatrix> {
    let frames = raw_frames(w, cfg)?;
    let sr = w.sample_rate as f64;
    let values = frames.iter().map(|f| frame_pitch(f, sr, &params)).collect();
    scalar_track(FeatureKind::Pitch, "pitch_hz", cfg, values)
}

/// `sqrt(mean(x²))` per un-windowed frame.
pub fn rms_energy(w: &Waveform, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    let frames = raw_frames(w, cfg)?;
    let values = frames
        .iter()
        .map(|f| (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt())
        .collect();
    scalar_track(FeatureKind::Energy, "rms", cfg, values)
}

/// `mean(|x|)` per un-windowed frame.
pub fn frame_magnitude(w: &Waveform, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    let frames = raw_frames(w, cfg)?;
    let values = frames
        .iter()
        .map(|f| f.iter().map(|v| v.abs()).sum::<f64>() / f.len() as f64)
        .collect();
    scalar_track(FeatureKind::Magnitude, "magnitude", cfg, values)
}

/// Fraction of adjacent sample pairs with a strict sign change.
pub fn zcr(w: &Waveform, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    let frames = raw_frames(w, cfg)?;
    let values = frames
        .iter()
        .map(|f| {
            if f.len() < 2 {
                return 0.0;
            }
            let crossings = f.windows(2).filter(|p| p[0] * p[1] < 0.0).count();
            crossings as f64 / (f.len() - 1) as f64
        })
        .collect();
    scalar_track(FeatureKind::Zcr, "zcr", cfg, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn sine(freq: f64, sr: u32, n: usize, phase: f64) -> Waveform {
        let s = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / sr as f64 + phase).sin() as f32)
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn pitch_of_100hz_sine() {
        let w = sine(100.0, 16000, 16000, 0.3);
        let p = pitch_track(&w, &FrameConfig::new(0.04, 0.01), PitchParams::default()).unwrap();
        for &f in &p.data {
            assert!((f - 100.0).abs() <= 2.0, "{f}");
        }
    }

    #[test]
    fn pitch_tracks_other_frequencies() {
        for f0 in [80.0, 155.0, 230.0, 390.0] {
            let w = sine(f0, 16000, 8000, 0.0);
            let p = pitch_track(&w, &FrameConfig::new(0.04, 0.02), PitchParams::default()).unwrap();
            let mid = p.data[p.frames / 2];
            assert!((mid - f0).abs() / f0 < 0.02, "{f0}: {mid}");
        }
    }

    #[test]
    fn white_noise_is_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let s = (0..32000).map(|_| normal.sample(&mut rng) as f32).collect();
        let w = Waveform::new(s, 16000).unwrap();
        let p = pitch_track(&w, &FrameConfig::new(0.04, 0.01), PitchParams::default()).unwrap();
        let unvoiced = p.data.iter().filter(|&&v| v == 0.0).count();
        assert!(unvoiced as f64 >= 0.9 * p.frames as f64, "{unvoiced}/{}", p.frames);
    }

    #[test]
    fn silence_and_short_frames_unvoiced() {
        let w = Waveform::new(vec![0.0; 4000], 16000).unwrap();
        let p = pitch_track(&w, &FrameConfig::new(0.04, 0.01), PitchParams::default()).unwrap();
        assert!(p.data.iter().all(|&v| v == 0.0));
        // 10 ms frames are shorter than a 50 Hz period
        let w = sine(100.0, 16000, 4000, 0.0);
        let p = pitch_track(&w, &FrameConfig::mfcc_default(), PitchParams::default()).unwrap();
        assert!(p.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_and_magnitude() {
        let cfg = FrameConfig::mfcc_default();
        let w = Waveform::new(vec![0.5; 1600], 16000).unwrap();
        for m in [rms_energy(&w, &cfg).unwrap(), frame_magnitude(&w, &cfg).unwrap()] {
            assert!(m.data.iter().all(|&v| (v - 0.5).abs() < 1e-12));
        }
        let z = Waveform::new(vec![0.0; 1600], 16000).unwrap();
        assert!(rms_energy(&z, &cfg).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(frame_magnitude(&z, &cfg).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rms_of_unit_sine() {
        // 10 ms frames hold exactly one period of 100 Hz at 16 kHz
        let w = sine(100.0, 16000, 16000, 0.1);
        let r = rms_energy(&w, &FrameConfig::mfcc_default()).unwrap();
        for &v in &r.data {
            assert!((v - 0.5f64.sqrt()).abs() <= 1e-3, "{v}");
        }
    }

    #[test]
    fn zero_crossing_rates() {
        let cfg = FrameConfig::mfcc_default();
        let alt = Waveform::new((0..1600).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(), 16000).unwrap();
        assert!(zcr(&alt, &cfg).unwrap().data.iter().all(|&v| v == 1.0));
        let pos = Waveform::new(vec![0.2; 1600], 16000).unwrap();
        assert!(zcr(&pos, &cfg).unwrap().data.iter().all(|&v| v == 0.0));
        let w = sine(100.0, 16000, 16000, 0.4);
        for &v in &zcr(&w, &cfg).unwrap().data {
            assert!((v - 0.0126).abs() <= 0.002, "{v}");
        }
    }
}
