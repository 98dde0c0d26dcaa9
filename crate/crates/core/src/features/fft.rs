use std::f64::consts::PI;

use num_complex::Complex64;

use super::{FeatureError, Result};

/// Precomputed twiddles and bit-reversal permutation for an iterative
/// radix-2 Cooley-Tukey transform of size `n`.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(FeatureError::NotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(FftPlan { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    /// Inverse transform including the 1/n factor, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
        let scale = 1.0 / self.n as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "buffer length must match plan size");
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Forward transform of a real signal zero-padded to the plan size.
    pub fn forward_real(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() > self.n {
            return Err(FeatureError::Config(format!(
                "input of length {} exceeds FFT size {}",
                x.len(),
                self.n
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward(&mut buf);
        Ok(buf)
    }

    /// `|X[k]|² / x.len()` for `k = 0..=n/2`.
    pub fn periodogram(&self, x: &[f64]) -> Result<Vec<f64>> {
        let spec = self.forward_real(x)?;
        let norm = if x.is_empty() { 1.0 } else { x.len() as f64 };
        Ok(spec[..=self.n / 2].iter().map(|c| c.norm_sqr() / norm).collect())
    }
}

/// `X[k] = Σ x[t]·e^(−2πi·kt/n)` with `x` zero-padded to `n`.
pub fn fft_real(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    FftPlan::new(n)?.forward_real(x)
}

/// One-sided power spectrum `|X[k]|²/N`, `N` being the unpadded frame length.
pub fn periodogram(frame: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    FftPlan::new(fft_size)?.periodogram(frame)
}
