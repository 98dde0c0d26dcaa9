use super::{AudioError, Result, Waveform};

/// Default distance below the peak frame RMS treated as silence.
pub const DEFAULT_TRIM_DB: f64 = 40.0;

const FRAME_S: f64 = 0.025;
const HOP_S: f64 = 0.010;

/// Drop leading and trailing 25 ms frames (10 ms hop) whose RMS is more than
/// `threshold_db` below the loudest frame. Interior audio is never removed;
/// an all-silent input yields an empty waveform.
pub fn trim_silence(w: &Waveform, threshold_db: f64) -> Result<Waveform> {
    if !(threshold_db > 0.0) {
        return Err(AudioError::Invalid(format!("trim threshold must be > 0 dB, got {threshold_db}")));
    }
    if w.is_empty() {
        return Ok(w.clone());
    }
    let sr = w.sample_rate as f64;
    let win = ((FRAME_S * sr).round() as usize).max(1);
    let hop = ((HOP_S * sr).round() as usize).max(1);
    let n_frames = if w.len() <= win { 1 } else { (w.len() - win) / hop + 1 };
    let rms: Vec<f64> = (0..n_frames)
        .map(|t| {
            let seg = &w.samples[t * hop..(t * hop + win).min(w.len())];
            (seg.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / seg.len() as f64).sqrt()
        })
        .collect();
    let peak = rms.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Waveform::new(Vec::new(), w.sample_rate);
    }
    let floor = peak * 10f64.powf(-threshold_db / 20.0);
    let first = rms.iter().position(|&r| r >= floor).expect("peak frame qualifies");
    let last = rms.iter().rposition(|&r| r >= floor).expect("peak frame qualifies");
    let start = if first == 0 { 0 } else { first * hop };
    let end = if last == n_frames - 1 {
        w.len()
    } else {
        (last * hop + win).min(w.len())
    };
    Waveform::new(w.samples[start..end].to_vec(), w.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn trims_padding_around_sine() {
        let sr = 16000;
        let mut s = vec![0.0f32; sr / 2];
        s.extend((0..sr).map(|i| (0.5 * (2.0 * PI * 220.0 * i as f64 / sr as f64).sin()) as f32));
        s.extend(vec![0.0f32; sr / 2]);
        let t = trim_silence(&Waveform::new(s, sr as u32).unwrap(), DEFAULT_TRIM_DB).unwrap();
        // the kept region starts at most one frame before the onset and ends
        // at most one frame after the offset
        let tol = (0.025 * sr as f64) as usize;
        assert!(t.len() >= sr && t.len() <= sr + 2 * tol, "{}", t.len());
        let lead = t.samples.iter().position(|&v| v != 0.0).unwrap();
        assert!(lead <= tol);
    }

    #[test]
    fn loud_signal_unchanged() {
        let s: Vec<f32> = (0..12345).map(|i| if i % 3 == 0 { 0.4 } else { -0.3 }).collect();
        let w = Waveform::new(s, 16000).unwrap();
        assert_eq!(trim_silence(&w, DEFAULT_TRIM_DB).unwrap(), w);
    }

    #[test]
    fn all_zero_is_empty() {
        let w = Waveform::new(vec![0.0; 5000], 16000).unwrap();
        assert!(trim_silence(&w, DEFAULT_TRIM_DB).unwrap().is_empty());
        assert!(trim_silence(&w, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn idempotent(
            lead in 0usize..4000, body in 1usize..6000, tail in 0usize..4000,
            amp in 0.01f32..1.0, noise in 0.0f32..0.001,
        ) {
            let mut s = Vec::new();
            s.extend((0..lead).map(|i| noise * ((i * 7919 % 13) as f32 / 13.0 - 0.5)));
            s.extend((0..body).map(|i| amp * ((i as f32) * 0.07).sin()));
            s.extend((0..tail).map(|i| noise * ((i * 104729 % 17) as f32 / 17.0 - 0.5)));
            let w = Waveform::new(s, 16000).unwrap();
            let once = trim_silence(&w, DEFAULT_TRIM_DB).unwrap();
            let twice = trim_silence(&once, DEFAULT_TRIM_DB).unwrap();
            prop_assert_eq!(once.sample_rate, w.sample_rate);
            prop_assert_eq!(twice, once);
        }
    }
}
