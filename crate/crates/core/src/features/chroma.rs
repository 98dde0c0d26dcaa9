use super::frame::frame_samples;
use super::{FeatureKind, FeatureMatrix, FftPlan, FrameConfig, Result};
use crate::audio::Waveform;

/// Pitch-class names; index 0 is A (the 440 Hz reference).
pub const PITCH_CLASSES: [&str; 12] = ["A", "A#", "B", "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#"];

const MIN_FREQ_HZ: f64 = 27.5;

fn pitch_class(freq: f64) -> usize {
    ((12.0 * (freq / 440.0).log2()).round() as i64).rem_euclid(12) as usize
}

/// Bin power folded into 12 pitch classes, un-normalized.
pub(crate) fn chroma_raw(w: &Waveform, cfg: &FrameConfig) -> Result<(usize, Vec<f64>)> {
    let g = cfg.geometry(w.sample_rate)?;
    let frames = frame_samples(&w.samples, &g, cfg.window_fn)?;
    let plan = FftPlan::new(g.fft_size)?;
    let bin_hz = w.sample_rate as f64 / g.fft_size as f64;
    let classes: Vec<Option<usize>> = (0..g.n_bins())
        .map(|k| {
            let f = k as f64 * bin_hz;
            (f >= MIN_FREQ_HZ).then(|| pitch_class(f))
        })
        .collect();
    let mut data = Vec::with_capacity(frames.n_frames * 12);
    for frame in frames.iter() {
        let mut row = [0.0; 12];
        for (p, class) in plan.periodogram(frame)?.iter().zip(&classes) {
            if let Some(c) = class {
                row[*c] += p;
            }
        }
        data.extend_from_slice(&row);
    }
    Ok((frames.n_frames, data))
}

/// 12-bin chroma per frame, each row scaled to a maximum of 1 unless all zero.
pub fn chroma(w: &Waveform, cfg: &FrameConfig) -> Result<FeatureMatrix> {
    let (frames, mut data) = chroma_raw(w, cfg)?;
    for row in data.chunks_exact_mut(12) {
        let max = row.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            row.iter_mut().for_each(|v| *v /= max);
        }
    }
    Ok(FeatureMatrix::new(FeatureKind::Chroma, *cfg, frames, 12, data)?
        .with_labels(PITCH_CLASSES.iter().map(|s| s.to_string()).collect()))
}
