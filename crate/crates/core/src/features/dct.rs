use std::f64::consts::PI;

/// Cosine basis for an orthonormal DCT-II of length `n`, row `k` holding
/// `s_k·cos(π·k·(2i+1)/(2n))`.
#[derive(Debug, Clone)]
pub(crate) struct DctBasis {
    n: usize,
    table: Vec<f64>,
}

impl DctBasis {
    pub(crate) fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n * n);
        for k in 0..n {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                table.push(s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos());
            }
        }
        DctBasis { n, table }
    }

    /// First `keep` DCT-II coefficients of `x`.
    pub(crate) fn forward(&self, x: &[f64], keep: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..keep.min(self.n))
            .map(|k| {
                self.table[k * self.n..(k + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect()
    }

    pub(crate) fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &c) in coeffs.iter().enumerate().take(self.n) {
            for (o, b) in out.iter_mut().zip(&self.table[k * self.n..(k + 1) * self.n]) {
                *o += c * b;
            }
        }
        out
    }
}

/// Orthonormal DCT-II.
pub fn dct2_ortho(x: &[f64]) -> Vec<f64> {
    DctBasis::new(x.len()).forward(x, x.len())
}

/// Orthonormal DCT-III, the inverse of [`dct2_ortho`].
pub fn dct3_ortho(x: &[f64]) -> Vec<f64> {
    DctBasis::new(x.len()).inverse(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_has_only_dc() {
        let c = dct2_ortho(&[3.0; 40]);
        assert!((c[0] - 3.0 * 40f64.sqrt()).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn round_trip_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = dct2_ortho(&x);
        let back = dct3_ortho(&c);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-6);
        }
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = c.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() / ex < 1e-6);
    }
}
