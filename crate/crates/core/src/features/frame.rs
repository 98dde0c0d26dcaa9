use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{FeatureError, Result};
use crate::audio::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    Hann,
    Rectangular,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Short-time analysis parameters, expressed in seconds so they apply at any
/// sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub window_fn: WindowFn,
    /// `None` selects the next power of two at or above the window length.
    #[serde(default)]
    pub fft_size: Option<usize>,
}

/// A [`FrameConfig`] resolved to sample counts at a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub win: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl FrameGeometry {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of full frames in a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.win {
            0
        } else {
            (len - self.win) / self.hop + 1
        }
    }
}

impl FrameConfig {
    pub fn new(window_s: f64, hop_s: f64) -> Self {
        FrameConfig {
            window_s,
            hop_s,
            window_fn: WindowFn::Hann,
            fft_size: None,
        }
    }

    /// 10 ms windows with a 5 ms hop.
    pub fn mfcc_default() -> Self {
        Self::new(0.010, 0.005)
    }

    /// 14 ms windows with a 3.5 ms hop.
    pub fn logmel_default() -> Self {
        Self::new(0.014, 0.0035)
    }

    /// 32 ms Hann windows at 50% overlap, used by the denoisers.
    pub fn cleaning_default() -> Self {
        Self::new(0.032, 0.016)
    }

    pub fn with_window(mut self, window_fn: WindowFn) -> Self {
        self.window_fn = window_fn;
        self
    }

    pub fn with_fft_size(mut self, fft_size: usize) -> Self {
        self.fft_size = Some(fft_size);
        self
    }

    pub fn geometry(&self, sample_rate: u32) -> Result<FrameGeometry> {
        if sample_rate == 0 {
            return Err(FeatureError::Config("sample rate must be positive".into()));
        }
        if !(self.window_s > 0.0 && self.hop_s > 0.0 && self.hop_s <= self.window_s) {
            return Err(FeatureError::Config(format!(
                "need 0 < hop ({}) <= window ({})",
                self.hop_s, self.window_s
            )));
        }
        let sr = sample_rate as f64;
        let win = (self.window_s * sr).round() as usize;
        let hop = (self.hop_s * sr).round() as usize;
        if win == 0 || hop == 0 {
            return Err(FeatureError::Config(format!(
                "window {}s / hop {}s rounds to zero samples at {sample_rate} Hz",
                self.window_s, self.hop_s
            )));
        }
        let fft_size = match self.fft_size {
            None => win.next_power_of_two(),
            Some(n) if !n.is_power_of_two() => return Err(FeatureError::NotPowerOfTwo(n)),
            Some(n) if n < win => {
                return Err(FeatureError::Config(format!(
                    "fft size {n} is smaller than the {win}-sample window"
                )))
            }
            Some(n) => n,
        };
        Ok(FrameGeometry { win, hop, fft_size })
    }
}

/// Frames stored contiguously, `n_frames × win`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    data: Vec<f64>,
    pub n_frames: usize,
    pub win: usize,
}

impl Frames {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.win..(t + 1) * self.win]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.win)
    }
}

/// Slice a waveform into frames `[t*hop, t*hop+win)` and apply the window.
pub fn frame_signal(w: &Waveform, cfg: &FrameConfig) -> Result<Frames> {
    let g = cfg.geometry(w.sample_rate)?;
    frame_samples(&w.samples, &g, cfg.window_fn)
}

pub(crate) fn frame_samples(samples: &[f32], g: &FrameGeometry, window_fn: WindowFn) -> Result<Frames> {
    let n_frames = g.frame_count(samples.len());
    if n_frames == 0 {
        return Err(FeatureError::TooShort {
            len: samples.len(),
            win: g.win,
        });
    }
    let window = window_fn.coefficients(g.win);
    let mut data = Vec::with_capacity(n_frames * g.win);
    for t in 0..n_frames {
        let start = t * g.hop;
        data.extend(
            samples[start..start + g.win]
                .iter()
                .zip(&window)
                .map(|(&x, &c)| x as f64 * c),
        );
    }
    Ok(Frames {
        data,
        n_frames,
        win: g.win,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mfcc_frame_count() {
        let w = Waveform::new(vec![0.1; 16000], 16000).unwrap();
        let f = frame_signal(&w, &FrameConfig::mfcc_default()).unwrap();
        assert_eq!(f.n_frames, 199);
        assert_eq!(f.win, 160);
    }

    #[test]
    fn logmel_geometry_at_48k() {
        let g = FrameConfig::logmel_default().geometry(48_000).unwrap();
        assert_eq!((g.win, g.hop, g.fft_size), (672, 168, 1024));
        assert_eq!(g.frame_count(144_000), 854);
    }

    #[test]
    fn hop_equal_to_window_partitions() {
        let samples: Vec<f32> = (0..100).map(|i| i as f32 / 100.0).collect();
        let w = Waveform::new(samples.clone(), 1000).unwrap();
        let cfg = FrameConfig::new(0.01, 0.01).with_window(WindowFn::Rectangular);
        let f = frame_signal(&w, &cfg).unwrap();
        assert_eq!(f.n_frames, 10);
        let joined: Vec<f32> = f.iter().flatten().map(|&x| x as f32).collect();
        assert_eq!(joined, samples);
    }

    #[test]
    fn rectangular_on_constant() {
        let w = Waveform::new(vec![1.0; 500], 1000).unwrap();
        let cfg = FrameConfig::new(0.02, 0.007).with_window(WindowFn::Rectangular);
        let f = frame_signal(&w, &cfg).unwrap();
        assert!(f.iter().all(|fr| fr.iter().all(|&x| x == 1.0)));
    }

    #[test]
    fn too_short_and_bad_config() {
        let w = Waveform::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            frame_signal(&w, &FrameConfig::mfcc_default()),
            Err(FeatureError::TooShort { len: 100, win: 160 })
        ));
        assert!(FrameConfig::new(0.01, 0.02).geometry(16000).is_err());
        assert!(matches!(
            FrameConfig::new(0.01, 0.005).with_fft_size(200).geometry(16000),
            Err(FeatureError::NotPowerOfTwo(200))
        ));
        assert!(FrameConfig::new(0.01, 0.005).with_fft_size(128).geometry(16000).is_err());
    }

    #[test]
    fn periodic_hann_sums_to_one_at_half_overlap() {
        let w = WindowFn::Hann.coefficients(64);
        for i in 0..32 {
            assert!((w[i] + w[i + 32] - 1.0).abs() < 1e-12);
        }
    }
}
