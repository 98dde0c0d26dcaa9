use super::{AudioError, Result, Waveform};

/// Linear-interpolation resampler. Output sample `k` reads source position
/// `k·src/dst`, clamped to the last sample; length is `round(len·dst/src)`.
pub fn resample_linear(w: &Waveform, target_sr: u32) -> Result<Waveform> {
    if target_sr == 0 {
        return Err(AudioError::Invalid("target sample rate must be positive".into()));
    }
    if target_sr == w.sample_rate || w.is_empty() {
        return Waveform::new(w.samples.clone(), target_sr);
    }
    let ratio = w.sample_rate as f64 / target_sr as f64;
    let out_len = (w.len() as f64 / ratio).round() as usize;
    let last = w.len() - 1;
    let samples = (0..out_len)
        .map(|k| {
            let pos = (k as f64 * ratio).min(last as f64);
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            let a = w.samples[i] as f64;
            let b = w.samples[(i + 1).min(last)] as f64;
            (a + (b - a) * frac) as f32
        })
        .collect();
    Waveform::new(samples, target_sr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate() {
        let w = Waveform::new(vec![0.1, -0.2, 0.3], 16000).unwrap();
        assert_eq!(resample_linear(&w, 16000).unwrap(), w);
    }

    #[test]
    fn ramp_downsample() {
        let w = Waveform::new(vec![0.0, 0.25, 0.5, 0.75], 4).unwrap();
        let r = resample_linear(&w, 2).unwrap();
        assert_eq!(r.samples, vec![0.0, 0.5]);
        let up = resample_linear(&w, 8).unwrap();
        assert_eq!(up.samples.len(), 8);
        assert_eq!(up.samples[1], 0.125);
        assert_eq!(up.samples[7], 0.75);
    }

    #[test]
    fn constant_stays_constant() {
        let w = Waveform::new(vec![0.3; 441], 44100).unwrap();
        for sr in [8000, 16000, 48000] {
            let r = resample_linear(&w, sr).unwrap();
            assert_eq!(r.len(), (441.0 * sr as f64 / 44100.0).round() as usize);
            assert!(r.samples.iter().all(|&s| (s - 0.3).abs() < 1e-6));
        }
        assert!(resample_linear(&w, 0).is_err());
    }
}
