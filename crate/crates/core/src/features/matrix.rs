use serde::{Deserialize, Serialize};

use super::{FeatureError, FrameConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Logmel,
    Mfcc,
    Pitch,
    Energy,
    Magnitude,
    Zcr,
    Chroma,
    Stacked,
}

/// A `frames × dims` feature matrix, row-major, with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub frames: usize,
    pub dims: usize,
    pub data: Vec<f64>,
    pub kind: FeatureKind,
    pub config: FrameConfig,
    #[serde(default)]
    pub dim_labels: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn new(
        kind: FeatureKind,
        config: FrameConfig,
        frames: usize,
        dims: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if frames == 0 || dims == 0 {
            return Err(FeatureError::Mismatch(format!(
                "feature matrix must be non-empty, got {frames}×{dims}"
            )));
        }
        if data.len() != frames * dims {
            return Err(FeatureError::Mismatch(format!(
                "{} values do not fill a {frames}×{dims} matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix {
            frames,
            dims,
            data,
            kind,
            config,
            dim_labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        debug_assert_eq!(labels.len(), self.dims);
        self.dim_labels = Some(labels);
        self
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims)
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.data[t * self.dims + d]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.rows().map(|r| r[d]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Round every entry through `f32`, the precision used by the feature
    /// cache, so in-memory and cached features are identical.
    pub fn quantize_f32(mut self) -> Self {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
        self
    }

    /// Truncate or extend (replicating the last frame) to `frames` rows.
    pub fn fit_frames(&self, frames: usize) -> FeatureMatrix {
        let mut out = self.clone();
        if frames == 0 {
            return out;
        }
        out.data.truncate(frames.min(self.frames) * self.dims);
        while out.data.len() < frames * self.dims {
            let last = self.row(self.frames - 1);
            out.data.extend_from_slice(last);
        }
        out.frames = frames;
        out
    }

    /// Transpose into a `dims × frames` row-major buffer.
    pub fn transposed(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for t in 0..self.frames {
            for d in 0..self.dims {
                out[d * self.frames + t] = self.data[t * self.dims + d];
            }
        }
        out
    }
}

/// Concatenate feature matrices column-wise in the given order.
///
/// Parts must have the same frame count and hop; window lengths may differ
/// (pitch tracks use a longer window than the cepstral frames they sit
/// beside).
pub fn stack_features(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| FeatureError::Mismatch("nothing to stack".into()))?;
    for p in &parts[1..] {
        if p.frames != first.frames {
            return Err(FeatureError::Mismatch(format!(
                "frame count mismatch: {} vs {}",
                first.frames, p.frames
            )));
        }
        if (p.config.hop_s - first.config.hop_s).abs() > 1e-12 {
            return Err(FeatureError::Mismatch(format!(
                "hop mismatch: {}s vs {}s",
                first.config.hop_s, p.config.hop_s
            )));
        }
    }
    let dims: usize = parts.iter().map(|p| p.dims).sum();
    let mut data = Vec::with_capacity(first.frames * dims);
    for t in 0..first.frames {
        for p in parts {
            data.extend_from_slice(p.row(t));
        }
    }
    let labels = parts
        .iter()
        .enumerate()
        .flat_map(|(i, p)| match &p.dim_labels {
            Some(l) => l.clone(),
            None => (0..p.dims).map(|d| format!("part{i}_{d}")).collect(),
        })
        .collect();
    Ok(FeatureMatrix::new(FeatureKind::Stacked, first.config, first.frames, dims, data)?.with_labels(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(frames: usize, dims: usize, fill: f64) -> FeatureMatrix {
        FeatureMatrix::new(
            FeatureKind::Mfcc,
            FrameConfig::mfcc_default(),
            frames,
            dims,
            vec![fill; frames * dims],
        )
        .unwrap()
    }

    #[test]
    fn stacking_dims() {
        let s = stack_features(&[m(10, 25, 1.0), m(10, 25, 2.0)]).unwrap();
        assert_eq!(s.dims, 50);
        assert_eq!(s.kind, FeatureKind::Stacked);
        assert_eq!(s.row(3)[24], 1.0);
        assert_eq!(s.row(3)[25], 2.0);
        let s = stack_features(&[m(10, 25, 1.0), m(10, 25, 2.0), m(10, 25, 3.0)]).unwrap();
        assert_eq!(s.dims, 75);
        assert_eq!(s.dim_labels.as_ref().unwrap().len(), 75);
    }

    #[test]
    fn stacking_mismatch() {
        assert!(stack_features(&[m(10, 2, 0.0), m(11, 2, 0.0)]).is_err());
        assert!(stack_features(&[]).is_err());
    }

    #[test]
    fn fit_frames_pads_with_last_row() {
        let mut a = m(3, 2, 0.0);
        a.data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let longer = a.fit_frames(5);
        assert_eq!(longer.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 6.0, 5.0, 6.0]);
        assert_eq!(a.fit_frames(2).data, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shape_checked() {
        assert!(FeatureMatrix::new(FeatureKind::Zcr, FrameConfig::mfcc_default(), 0, 1, vec![]).is_err());
        assert!(FeatureMatrix::new(FeatureKind::Zcr, FrameConfig::mfcc_default(), 2, 1, vec![0.0]).is_err());
    }
}
