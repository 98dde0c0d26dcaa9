//! Frequency-domain noise reduction: noise estimation, spectral subtraction
//! and Wiener filtering over a Hann STFT with normalized overlap-add.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AudioError, Result, Waveform};
use crate::features::{FftPlan, FrameConfig, FrameGeometry};

/// Residual power kept by spectral subtraction, as a fraction of the noise power.
pub const SPECTRAL_FLOOR: f64 = 0.02;

/// Lowest-energy fraction of frames averaged into the noise estimate.
const NOISE_FRACTION: f64 = 0.10;
const MIN_NOISE_FRAMES: usize = 5;
const MIN_FRAMES: usize = 10;

/// Per-bin noise power in periodogram units (`|X|²/N`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub power: Vec<f64>,
    pub config: FrameConfig,
    pub sample_rate: u32,
}

impl NoiseProfile {
    pub fn zeros(config: FrameConfig, sample_rate: u32) -> Result<Self> {
        let g = config.geometry(sample_rate)?;
        Ok(NoiseProfile {
            power: vec![0.0; g.n_bins()],
            config,
            sample_rate,
        })
    }

    fn check(&self, w: &Waveform, cfg: &FrameConfig) -> Result<FrameGeometry> {
        let g = cfg.geometry(w.sample_rate)?;
        if self.power.len() != g.n_bins() {
            return Err(AudioError::Config(format!(
                "noise profile has {} bins but the frame config yields {}",
                self.power.len(),
                g.n_bins()
            )));
        }
        if self.sample_rate != w.sample_rate {
            return Err(AudioError::Config(format!(
                "noise profile estimated at {} Hz, signal is {} Hz",
                self.sample_rate, w.sample_rate
            )));
        }
        Ok(g)
    }
}

/// Mean periodogram of the quietest 10% of frames (at least 5).
pub fn estimate_noise(w: &Waveform, cfg: &FrameConfig) -> Result<NoiseProfile> {
    let g = cfg.geometry(w.sample_rate)?;
    let n_frames = g.frame_count(w.len());
    if n_frames < MIN_FRAMES {
        return Err(AudioError::Estimation(format!(
            "need at least {MIN_FRAMES} frames, signal has {n_frames}"
        )));
    }
    let window = cfg.window_fn.coefficients(g.win);
    let frame = |t: usize| -> Vec<f64> {
        w.samples[t * g.hop..t * g.hop + g.win]
            .iter()
            .zip(&window)
            .map(|(&s, &c)| s as f64 * c)
            .collect()
    };
    let mut energies: Vec<(f64, usize)> = (0..n_frames)
        .map(|t| (frame(t).iter().map(|v| v * v).sum(), t))
        .collect();
    energies.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let count = ((n_frames as f64 * NOISE_FRACTION).floor() as usize).max(MIN_NOISE_FRAMES);

    let plan = FftPlan::new(g.fft_size)?;
    let mut power = vec![0.0; g.n_bins()];
    for &(_, t) in &energies[..count] {
        for (acc, p) in power.iter_mut().zip(plan.periodogram(&frame(t))?) {
            *acc += p;
        }
    }
    power.iter_mut().for_each(|p| *p /= count as f64);
    Ok(NoiseProfile {
        power,
        config: *cfg,
        sample_rate: w.sample_rate,
    })
}

/// Run an STFT, let `gains` fill a per-bin amplitude gain from the frame's
/// periodogram, and resynthesize by window-normalized overlap-add. Output
/// length equals input length; unit gains reproduce the input.
fn apply_spectral_gain<F>(w: &Waveform, cfg: &FrameConfig, g: FrameGeometry, mut gains: F) -> Result<Waveform>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if w.is_empty() {
        return Ok(w.clone());
    }
    let window = cfg.window_fn.coefficients(g.win);
    let pad = g.win;
    let padded_len = w.len() + 2 * pad + g.hop;
    let mut padded = vec![0.0f64; padded_len];
    for (p, &s) in padded[pad..].iter_mut().zip(&w.samples) {
        *p = s as f64;
    }
    let n_frames = (padded_len - g.win) / g.hop + 1;
    let plan = FftPlan::new(g.fft_size)?;
    let n_bins = g.n_bins();
    let mut out = vec![0.0f64; padded_len];
    let mut wsum = vec![0.0f64; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); g.fft_size];
    let mut power = vec![0.0; n_bins];
    let mut gain = vec![1.0; n_bins];

    for t in 0..n_frames {
        let start = t * g.hop;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for i in 0..g.win {
            buf[i].re = padded[start + i] * window[i];
        }
        plan.forward(&mut buf);
        for k in 0..n_bins {
            power[k] = buf[k].norm_sqr() / g.win as f64;
        }
        gain.iter_mut().for_each(|v| *v = 1.0);
        gains(&power, &mut gain);
        for k in 0..n_bins {
            buf[k] *= gain[k];
            if k != 0 && k != g.fft_size / 2 {
                buf[g.fft_size - k] *= gain[k];
            }
        }
        plan.inverse(&mut buf);
        for i in 0..g.win {
            out[start + i] += buf[i].re;
            wsum[start + i] += window[i];
        }
    }
    let samples = (pad..pad + w.len())
        .map(|i| if wsum[i] > 1e-8 { (out[i] / wsum[i]) as f32 } else { 0.0 })
        .collect();
    Waveform::new(samples, w.sample_rate)
}

/// Power spectral subtraction with a Berouti over-subtraction factor and a
/// spectral floor of `SPECTRAL_FLOOR × noise`. Gains never exceed 1.
pub fn spectral_subtract(w: &Waveform, noise: &NoiseProfile, cfg: &FrameConfig) -> Result<Waveform> {
    let g = noise.check(w, cfg)?;
    let noise_total: f64 = noise.power.iter().sum();
    apply_spectral_gain(w, cfg, g, |power, gain| {
        if noise_total <= 0.0 {
            return;
        }
        let frame_total: f64 = power.iter().sum();
        // a-priori frame SNR; pure-noise frames clamp to -5 dB
        let snr_db = 10.0 * ((frame_total - noise_total).max(1e-12) / noise_total).log10();
        let alpha = (4.0 - 0.15 * snr_db).clamp(1.0, 4.75);
        for ((gk, &p), &n) in gain.iter_mut().zip(power).zip(&noise.power) {
            if p <= 0.0 {
                continue;
            }
            let cleaned = (p - alpha * n).max(SPECTRAL_FLOOR * n).min(p);
            *gk = (cleaned / p).sqrt();
        }
    })
}

/// Wiener gain `max(P − N, 0) / P` per bin, P the observed periodogram.
pub fn wiener_filter(w: &Waveform, noise: &NoiseProfile, cfg: &FrameConfig) -> Result<Waveform> {
    let g = noise.check(w, cfg)?;
    apply_spectral_gain(w, cfg, g, |power, gain| {
        for ((gk, &p), &n) in gain.iter_mut().zip(power).zip(&noise.power) {
            *gk = wiener_gain(p, n);
        }
    })
}

pub(crate) fn wiener_gain(observed: f64, noise: f64) -> f64 {
    if observed <= 0.0 {
        return if noise > 0.0 { 0.0 } else { 1.0 };
    }
    ((observed - noise).max(0.0) / observed).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const SR: u32 = 16000;

    fn noise(n: usize, std: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, std).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn sine(n: usize, amp: f64, freq: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / SR as f64).sin()).collect()
    }

    fn wave(x: &[f64]) -> Waveform {
        Waveform::new(x.iter().map(|&v| v as f32).collect(), SR).unwrap()
    }

    fn snr_db(clean: &[f64], processed: &[f32]) -> f64 {
        let s: f64 = clean.iter().map(|v| v * v).sum();
        let e: f64 = clean.iter().zip(processed).map(|(c, &p)| (c - p as f64).powi(2)).sum();
        10.0 * (s / e).log10()
    }

    fn segmental_snr(clean: &[f64], processed: &[f32], frame: usize) -> f64 {
        let mut vals = Vec::new();
        for (c, p) in clean.chunks_exact(frame).zip(processed.chunks_exact(frame)) {
            vals.push(snr_db(c, p).clamp(-10.0, 35.0));
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn zero_noise_is_identity() {
        let cfg = FrameConfig::cleaning_default();
        let x: Vec<f64> = noise(12345, 0.2, 1).iter().zip(sine(12345, 0.4, 300.0)).map(|(a, b)| a + b).collect();
        let w = wave(&x);
        let zero = NoiseProfile::zeros(cfg, SR).unwrap();
        for out in [spectral_subtract(&w, &zero, &cfg).unwrap(), wiener_filter(&w, &zero, &cfg).unwrap()] {
            assert_eq!(out.len(), w.len());
            let err = out.samples.iter().zip(&w.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
            assert!(err <= 1e-5, "max error {err}");
        }
    }

    #[test]
    fn identity_at_48k_with_padded_fft() {
        let cfg = FrameConfig::cleaning_default();
        let w = Waveform::new(noise(20000, 0.3, 4).iter().map(|&v| v as f32).collect(), 48000).unwrap();
        let zero = NoiseProfile::zeros(cfg, 48000).unwrap();
        let out = wiener_filter(&w, &zero, &cfg).unwrap();
        let err = out.samples.iter().zip(&w.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(err <= 1e-5);
    }

    #[test]
    fn wiener_gain_formula() {
        assert_eq!(wiener_gain(2.0, 2.0), 0.0);
        assert_eq!(wiener_gain(3.0, 0.0), 1.0);
        assert_eq!(wiener_gain(4.0, 1.0), 0.75);
        assert_eq!(wiener_gain(1.0, 3.0), 0.0);
        assert_eq!(wiener_gain(0.0, 0.0), 1.0);
    }

    #[test]
    fn white_noise_profile_is_flat() {
        let cfg = FrameConfig::cleaning_default();
        let w = wave(&noise(SR as usize * 4, 0.1, 2));
        let p = estimate_noise(&w, &cfg).unwrap();
        // ignore DC and Nyquist, which carry half the degrees of freedom
        let inner = &p.power[1..p.power.len() - 1];
        let max = inner.iter().cloned().fold(0.0, f64::max);
        let min = inner.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 10.0, "ratio {}", max / min);
        assert!(p.power.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn silence_profile_is_zero_and_deterministic() {
        let cfg = FrameConfig::cleaning_default();
        let mut x = vec![0.0; 8000];
        x.extend(sine(16000, 0.5, 200.0));
        let w = wave(&x);
        let p = estimate_noise(&w, &cfg).unwrap();
        assert!(p.power.iter().all(|&v| v < 1e-20));
        assert_eq!(p, estimate_noise(&w, &cfg).unwrap());
    }

    #[test]
    fn too_short_for_estimation() {
        let w = wave(&noise(2000, 0.1, 3));
        assert!(matches!(
            estimate_noise(&w, &FrameConfig::cleaning_default()),
            Err(AudioError::Estimation(_))
        ));
    }

    #[test]
    fn profile_mismatch_rejected() {
        let cfg = FrameConfig::cleaning_default();
        let w = wave(&noise(16000, 0.1, 3));
        let p = NoiseProfile::zeros(FrameConfig::new(0.064, 0.032), SR).unwrap();
        assert!(matches!(wiener_filter(&w, &p, &cfg), Err(AudioError::Config(_))));
        assert!(matches!(spectral_subtract(&w, &p, &cfg), Err(AudioError::Config(_))));
    }

    #[test]
    fn subtraction_improves_segmental_snr() {
        let cfg = FrameConfig::cleaning_default();
        let n = SR as usize * 3;
        // sine at -6 dBFS peak, white noise at -30 dBFS rms
        let clean = sine(n, 0.5, 440.0);
        let nz = noise(n, 10f64.powf(-30.0 / 20.0), 7);
        let noisy: Vec<f64> = clean.iter().zip(&nz).map(|(a, b)| a + b).collect();
        let profile = estimate_noise(&wave(&noise(n, 10f64.powf(-30.0 / 20.0), 8)), &cfg).unwrap();
        let out = spectral_subtract(&wave(&noisy), &profile, &cfg).unwrap();
        let before = segmental_snr(&clean, &wave(&noisy).samples, 512);
        let after = segmental_snr(&clean, &out.samples, 512);
        assert!(after - before >= 3.0, "before {before:.2} after {after:.2}");
    }

    #[test]
    fn subtraction_on_pure_noise() {
        let cfg = FrameConfig::cleaning_default();
        let w = wave(&noise(SR as usize * 3, 0.05, 11));
        let profile = estimate_noise(&w, &cfg).unwrap();
        let out = spectral_subtract(&w, &profile, &cfg).unwrap();
        assert!(out.rms() <= 0.2 * w.rms(), "{} vs {}", out.rms(), w.rms());
    }

    #[test]
    fn wiener_improves_snr() {
        let cfg = FrameConfig::cleaning_default();
        let n = SR as usize * 2;
        let lead = SR as usize / 2;
        let mut clean = vec![0.0; lead];
        clean.extend(sine(n - lead, 0.3, 330.0));
        let sig_rms = (clean[lead..].iter().map(|v| v * v).sum::<f64>() / (n - lead) as f64).sqrt();
        let nz = noise(n, sig_rms / 10f64.powf(10.0 / 20.0), 12);
        let noisy: Vec<f64> = clean.iter().zip(&nz).map(|(a, b)| a + b).collect();
        let w = wave(&noisy);
        let profile = estimate_noise(&w, &cfg).unwrap();
        let out = wiener_filter(&w, &profile, &cfg).unwrap();
        let before = snr_db(&clean, &w.samples);
        let after = snr_db(&clean, &out.samples);
        assert!(after > before, "before {before:.2} after {after:.2}");
    }

    #[test]
    fn denoisers_do_not_add_frame_energy() {
        let cfg = FrameConfig::cleaning_default();
        let g = cfg.geometry(SR).unwrap();
        for seed in 0..4 {
            let n = SR as usize * 2;
            let x: Vec<f64> = noise(n, 0.1, 100 + seed)
                .iter()
                .zip(sine(n, 0.3, 250.0 + 50.0 * seed as f64))
                .map(|(a, b)| a + b)
                .collect();
            let w = wave(&x);
            let profile = estimate_noise(&wave(&noise(n, 0.1, 200 + seed)), &cfg).unwrap();
            for out in [spectral_subtract(&w, &profile, &cfg).unwrap(), wiener_filter(&w, &profile, &cfg).unwrap()] {
                for t in 0..g.frame_count(n) {
                    let r = t * g.hop..t * g.hop + g.win;
                    let e_in: f64 = w.samples[r.clone()].iter().map(|&v| (v as f64).powi(2)).sum();
                    let e_out: f64 = out.samples[r].iter().map(|&v| (v as f64).powi(2)).sum();
                    assert!(e_out <= e_in + 1e-6, "frame {t}: {e_out} > {e_in}");
                }
            }
        }
    }
}
