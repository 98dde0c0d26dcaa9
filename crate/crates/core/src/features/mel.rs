use serde::{Deserialize, Serialize};

use super::dct::DctBasis;
use super::frame::frame_samples;
use super::{FeatureError, FeatureKind, FeatureMatrix, FftPlan, FrameConfig, Result};
use crate::audio::Waveform;

/// Floor added before taking logs of filterbank energies.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided FFT bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// `n_mels × n_bins`, row-major.
    pub weights: Vec<f64>,
    /// Center frequency of each filter in Hz.
    pub centers_hz: Vec<f64>,
    /// Nonzero column span `[start, end)` per row.
    support: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn support(&self, m: usize) -> (usize, usize) {
        self.support[m]
    }

    /// Filterbank energies of a one-sided power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        (0..self.n_mels)
            .map(|m| {
                let (s, e) = self.support[m];
                self.row(m)[s..e].iter().zip(&power[s..e]).map(|(w, p)| w * p).sum()
            })
            .collect()
    }
}

/// Build `n_mels` triangles whose edges are `n_mels + 2` points equally
/// spaced in mel between `fmin` and `fmax`.
///
/// Each row is scaled so its largest weight is exactly 1.0. A filter too
/// narrow to cover any bin gets a single unit weight on the bin nearest its
/// center, so no row is empty.
pub fn make_mel_filterbank(
    n_mels: usize,
    fft_size: usize,
    sample_rate: u32,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels < 2 {
        return Err(FeatureError::Config(format!("need at least 2 mel bands, got {n_mels}")));
    }
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist + 1e-9) {
        return Err(FeatureError::Config(format!(
            "mel range must satisfy 0 <= fmin ({fmin}) < fmax ({fmax}) <= {nyquist}"
        )));
    }
    if fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(FeatureError::NotPowerOfTwo(fft_size));
    }
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut weights = vec![0.0; n_mels * n_bins];
    let mut support = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            *w = if f > lo && f <= center {
                (f - lo) / (center - lo)
            } else if f > center && f < hi {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
        }
        let peak = row.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            row.iter_mut().for_each(|w| *w /= peak);
        } else {
            let k = ((center / bin_hz).round() as usize).min(n_bins - 1);
            row[k] = 1.0;
        }
        let start = row.iter().position(|&w| w > 0.0).unwrap_or(0);
        let end = n_bins - row.iter().rev().position(|&w| w > 0.0).unwrap_or(n_bins);
        support.push((start, end.max(start)));
    }
    Ok(MelFilterbank {
        n_mels,
        n_bins,
        fmin,
        fmax,
        weights,
        centers_hz: edges[1..=n_mels].to_vec(),
        support,
    })
}

/// Per-frame mel energies of a waveform as `frames × n_mels`.
fn mel_energies(w: &Waveform, cfg: &FrameConfig, n_mels: usize) -> Result<(usize, Vec<f64>)> {
    let g = cfg.geometry(w.sample_rate)?;
    let frames = frame_samples(&w.samples, &g, cfg.window_fn)?;
    let fb = make_mel_filterbank(n_mels, g.fft_size, w.sample_rate, 0.0, w.sample_rate as f64 / 2.0)?;
    let plan = FftPlan::new(g.fft_size)?;
    let mut out = Vec::with_capacity(frames.n_frames * n_mels);
    for frame in frames.iter() {
        out.extend(fb.apply(&plan.periodogram(frame)?));
    }
    Ok((frames.n_frames, out))
}

/// `ln(mel energy + 1e-10)` per frame, `frames × n_mels`.
pub fn log_mel_spectrogram(w: &Waveform, cfg: &FrameConfig, n_mels: usize) -> Result<FeatureMatrix> {
    let (frames, mut data) = mel_energies(w, cfg, n_mels)?;
    for v in &mut data {
        *v = (*v + LOG_FLOOR).ln();
    }
    Ok(FeatureMatrix::new(FeatureKind::Logmel, *cfg, frames, n_mels, data)?
        .with_labels((0..n_mels).map(|m| format!("mel{m}")).collect()))
}

/// Orthonormal DCT-II of the log mel energies, keeping the first `n_mfcc`
/// coefficients.
pub fn mfcc(w: &Waveform, cfg: &FrameConfig, n_mfcc: usize, n_mels: usize) -> Result<FeatureMatrix> {
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(FeatureError::Config(format!(
            "need 1 <= n_mfcc ({n_mfcc}) <= n_mels ({n_mels})"
        )));
    }
    let logmel = log_mel_spectrogram(w, cfg, n_mels)?;
    let basis = DctBasis::new(n_mels);
    let data: Vec<f64> = logmel.rows().flat_map(|r| basis.forward(r, n_mfcc)).collect();
    Ok(FeatureMatrix::new(FeatureKind::Mfcc, *cfg, logmel.frames, n_mfcc, data)?
        .with_labels((0..n_mfcc).map(|c| format!("mfcc{c}")).collect()))
}
