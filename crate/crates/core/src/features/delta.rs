use super::{FeatureError, FeatureMatrix, Result};

/// Regression deltas over `±n` frames:
/// `d_t = Σ_{k=1..n} k·(c_{t+k} − c_{t−k}) / (2·Σ k²)`, with out-of-range
/// frames replaced by the nearest edge frame.
pub fn deltas(f: &FeatureMatrix, n: usize) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(FeatureError::Config("delta window must be at least 1".into()));
    }
    if f.frames < 2 * n + 1 {
        return Err(FeatureError::Mismatch(format!(
            "deltas over ±{n} frames need at least {} frames, got {}",
            2 * n + 1,
            f.frames
        )));
    }
    let denom = 2.0 * (1..=n).map(|k| (k * k) as f64).sum::<f64>();
    let last = f.frames as isize - 1;
    let clamp = |t: isize| t.clamp(0, last) as usize;
    let mut data = vec![0.0; f.data.len()];
    for t in 0..f.frames {
        let out = &mut data[t * f.dims..(t + 1) * f.dims];
        for k in 1..=n {
            let fwd = f.row(clamp(t as isize + k as isize));
            let back = f.row(clamp(t as isize - k as isize));
            for ((o, a), b) in out.iter_mut().zip(fwd).zip(back) {
                *o += k as f64 * (a - b);
            }
        }
        out.iter_mut().for_each(|o| *o /= denom);
    }
    let mut out = FeatureMatrix::new(f.kind, f.config, f.frames, f.dims, data)?;
    out.dim_labels = f
        .dim_labels
        .as_ref()
        .map(|l| l.iter().map(|s| format!("d_{s}")).collect());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FrameConfig};
    use proptest::prelude::*;

    fn track(values: Vec<f64>) -> FeatureMatrix {
        let n = values.len();
        FeatureMatrix::new(FeatureKind::Mfcc, FrameConfig::mfcc_default(), n, 1, values).unwrap()
    }

    #[test]
    fn constant_track() {
        let d = deltas(&track(vec![4.0; 10]), 2).unwrap();
        assert!(d.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_ramp_interior_is_one() {
        let d = deltas(&track((0..12).map(|t| t as f64).collect()), 2).unwrap();
        for t in 2..10 {
            assert_eq!(d.data[t], 1.0);
        }
    }

    #[test]
    fn second_difference_of_quadratic() {
        let q = track((0..20).map(|t| (t * t) as f64).collect());
        let dd = deltas(&deltas(&q, 2).unwrap(), 2).unwrap();
        for t in 4..16 {
            assert!((dd.data[t] - 2.0).abs() < 1e-12, "t={t} {}", dd.data[t]);
        }
    }

    #[test]
    fn too_few_frames() {
        assert!(deltas(&track(vec![0.0; 4]), 2).is_err());
    }

    proptest! {
        #[test]
        fn linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            f in proptest::collection::vec(-10.0f64..10.0, 5..30),
        ) {
            let g: Vec<f64> = f.iter().map(|v| (v * 1.7).sin() * 4.0).collect();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = deltas(&track(combo), 2).unwrap();
            let df = deltas(&track(f.clone()), 2).unwrap();
            let dg = deltas(&track(g), 2).unwrap();
            for t in 0..f.len() {
                prop_assert!((lhs.data[t] - (a * df.data[t] + b * dg.data[t])).abs() < 1e-6);
            }
        }
    }
}
