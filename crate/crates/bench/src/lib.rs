//! Criterion benchmarks for the hot paths of `sertk`; see `benches/`.

/// Deterministic test signal: a few summed sinusoids.
pub fn signal(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            (t * 0.031).sin() + 0.5 * (t * 0.117).sin() + 0.25 * (t * 0.401).cos()
        })
        .collect()
}
