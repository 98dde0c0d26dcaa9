use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AtStage, HarnessError, Result, Stage};
use crate::audio::Waveform;
use crate::features::{
    chroma, deltas, frame_magnitude, log_mel_spectrogram, mfcc, pitch_track, rms_energy, serf, stack_features, zcr,
    FeatureMatrix, FrameConfig, PitchParams,
};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    #[default]
    Logmel,
    Mfcc,
    MfccDelta,
    MfccDeltaDelta,
    /// MFCC with pitch, RMS energy, frame magnitude and ZCR columns.
    MfccProsody,
    Chroma,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Logmel => "logmel",
            FeatureSet::Mfcc => "mfcc",
            FeatureSet::MfccDelta => "mfcc_delta",
            FeatureSet::MfccDeltaDelta => "mfcc_delta_delta",
            FeatureSet::MfccProsody => "mfcc_prosody",
            FeatureSet::Chroma => "chroma",
        }
    }
}

/// Feature extraction parameters. `frame = None` picks the per-kind default
/// (14/3.5 ms for log-mel and chroma, 10/5 ms for the MFCC family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub kind: FeatureSet,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub mfcc_mels: usize,
    pub delta_width: usize,
    pub frame: Option<FrameConfig>,
    pub normalize: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            kind: FeatureSet::Logmel,
            n_mels: 128,
            n_mfcc: 25,
            mfcc_mels: 40,
            delta_width: 2,
            frame: None,
            normalize: true,
        }
    }
}

impl FeatureSpec {
    pub fn frame_config(&self) -> FrameConfig {
        self.frame.unwrap_or(match self.kind {
            FeatureSet::Logmel | FeatureSet::Chroma => FrameConfig::logmel_default(),
            _ => FrameConfig::mfcc_default(),
        })
    }
}

const PITCH_WINDOW_S: f64 = 0.04;

/// Extract the configured features, rounded to f32 precision so freshly
/// computed and cached matrices are bit-identical.
pub fn extract(w: &Waveform, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let cfg = spec.frame_config();
    let f = Stage::Featurize;
    let m = match spec.kind {
        FeatureSet::Logmel => log_mel_spectrogram(w, &cfg, spec.n_mels).at(f)?,
        FeatureSet::Chroma => chroma(w, &cfg).at(f)?,
        FeatureSet::Mfcc => mfcc(w, &cfg, spec.n_mfcc, spec.mfcc_mels).at(f)?,
        FeatureSet::MfccDelta | FeatureSet::MfccDeltaDelta => {
            let base = mfcc(w, &cfg, spec.n_mfcc, spec.mfcc_mels).at(f)?;
            let d = deltas(&base, spec.delta_width).at(f)?;
            let mut parts = vec![base, d];
            if spec.kind == FeatureSet::MfccDeltaDelta {
                parts.push(deltas(&parts[1], spec.delta_width).at(f)?);
            }
            stack_features(&parts).at(f)?
        }
        FeatureSet::MfccProsody => {
            let base = mfcc(w, &cfg, spec.n_mfcc, spec.mfcc_mels).at(f)?;
            // pitch needs a window spanning at least two periods of the lowest f0
            let pitch_cfg = FrameConfig::new(PITCH_WINDOW_S.max(cfg.window_s), cfg.hop_s);
            let pitch = pitch_track(w, &pitch_cfg, PitchParams::default()).at(f)?.fit_frames(base.frames);
            let parts = [
                base,
                pitch,
                rms_energy(w, &cfg).at(f)?,
                frame_magnitude(w, &cfg).at(f)?,
                zcr(w, &cfg).at(f)?,
            ];
            stack_features(&parts).at(f)?
        }
    };
    if !m.is_finite() {
        return Err(HarnessError::new(f, "non-finite feature values"));
    }
    Ok(m.quantize_f32())
}

/// Hex SHA-256 prefix of the value's JSON encoding. Struct fields serialize
/// in declaration order, so the encoding is canonical for a given type.
pub fn stable_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config types serialize to JSON");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

/// On-disk feature store keyed by (utterance id, cleaning hash, feature hash).
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(root: &Path, cleaning_hash: &str, feature_hash: &str) -> Self {
        FeatureCache {
            dir: root.join(format!("{cleaning_hash}-{feature_hash}")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: &str) -> PathBuf {
        let safe: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect();
        self.dir.join(format!("{safe}.serf"))
    }

    /// Load a cached matrix; unreadable entries are treated as misses.
    pub fn get(&self, id: &str) -> Option<FeatureMatrix> {
        let path = self.path_for(id);
        if !path.exists() {
            return None;
        }
        match serf::load_matrix(&path) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, id: &str, m: &FeatureMatrix) -> Result<()> {
        serf::save_matrix(&self.path_for(id), m).at_ctx(Stage::Featurize, self.dir.display())
    }

    pub fn get_or_insert_with(&self, id: &str, make: impl FnOnce() -> Result<FeatureMatrix>) -> Result<FeatureMatrix> {
        if let Some(m) = self.get(id) {
            return Ok(m);
        }
        let m = make()?;
        self.put(id, &m)?;
        Ok(m)
    }
}

/// Per-dimension z-normalization fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &[&FeatureMatrix]) -> Result<Self> {
        let dims = train
            .first()
            .ok_or_else(|| HarnessError::new(Stage::Featurize, "no training features to normalize with"))?
            .dims;
        let mut sum = vec![0.0; dims];
        let mut n = 0usize;
        for m in train {
            if m.dims != dims {
                return Err(HarnessError::new(
                    Stage::Featurize,
                    format!("feature width {} differs from {dims}", m.dims),
                ));
            }
            for row in m.rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            n += m.frames;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; dims];
        for m in train {
            for row in m.rows() {
                for ((s, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
                    *s += (v - mu) * (v - mu);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.dims != self.mean.len() {
            return Err(HarnessError::new(
                Stage::Featurize,
                format!("feature width {} but normalizer has {}", m.dims, self.mean.len()),
            ));
        }
        let mut out = m.clone();
        for row in out.data.chunks_mut(m.dims) {
            for ((v, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(out)
    }
}

/// How a `frames × dims` matrix becomes a network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputLayout {
    /// `[1, dims, frames]`: a one-channel image with features on the height axis.
    Image,
    /// `[dims, frames]`: feature dimensions as channels of a 1-D sequence.
    Sequence,
    /// `[frames, dims]` after padding or cropping to a fixed frame count.
    Flat { frames: usize },
}

impl InputLayout {
    pub fn to_tensor(&self, m: &FeatureMatrix) -> Result<Tensor<f32>> {
        let (shape, data) = match *self {
            InputLayout::Image => (vec![1, m.dims, m.frames], m.transposed()),
            InputLayout::Sequence => (vec![m.dims, m.frames], m.transposed()),
            InputLayout::Flat { frames } => {
                let fitted = m.fit_frames(frames);
                (vec![frames, m.dims], fitted.data)
            }
        };
        Tensor::from_f64(&shape, &data).at(Stage::Train)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FrameConfig};

    fn sine(sr: u32, secs: f64) -> Waveform {
        let n = (sr as f64 * secs) as usize;
        let s = (0..n)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * 220.0 * i as f64 / sr as f64).sin()) as f32)
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    fn matrix(frames: usize, dims: usize, data: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(FeatureKind::Stacked, FrameConfig::mfcc_default(), frames, dims, data).unwrap()
    }

    #[test]
    fn feature_widths() {
        let w = sine(16000, 0.5);
        let spec = |kind| FeatureSpec {
            kind,
            n_mels: 32,
            n_mfcc: 13,
            ..Default::default()
        };
        assert_eq!(extract(&w, &spec(FeatureSet::Logmel)).unwrap().dims, 32);
        assert_eq!(extract(&w, &spec(FeatureSet::Mfcc)).unwrap().dims, 13);
        assert_eq!(extract(&w, &spec(FeatureSet::MfccDelta)).unwrap().dims, 26);
        assert_eq!(extract(&w, &spec(FeatureSet::MfccDeltaDelta)).unwrap().dims, 39);
        assert_eq!(extract(&w, &spec(FeatureSet::MfccProsody)).unwrap().dims, 17);
        assert_eq!(extract(&w, &spec(FeatureSet::Chroma)).unwrap().dims, 12);
    }

    #[test]
    fn extraction_is_f32_exact() {
        let m = extract(&sine(8000, 0.3), &FeatureSpec::default()).unwrap();
        assert!(m.data.iter().all(|&v| v == v as f32 as f64));
    }

    #[test]
    fn cache_round_trip_and_corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), "a", "b");
        let m = extract(&sine(8000, 0.3), &FeatureSpec::default()).unwrap();
        let got = cache.get_or_insert_with("03-01/x y", || Ok(m.clone())).unwrap();
        assert_eq!(got, m);
        let again = cache.get_or_insert_with("03-01/x y", || panic!("should hit")).unwrap();
        assert_eq!(again, m);
        std::fs::write(cache.path_for("03-01/x y"), b"garbage").unwrap();
        assert!(cache.get("03-01/x y").is_none());
    }

    #[test]
    fn hash_changes_with_config() {
        let a = FeatureSpec::default();
        let b = FeatureSpec { n_mels: 64, ..a.clone() };
        assert_eq!(stable_hash(&a), stable_hash(&a.clone()));
        assert_ne!(stable_hash(&a), stable_hash(&b));
        assert_eq!(stable_hash(&a).len(), 16);
    }

    #[test]
    fn normalizer_uses_training_statistics() {
        let train = matrix(4, 2, vec![1.0, 10.0, 3.0, 10.0, 5.0, 10.0, 7.0, 10.0]);
        let n = Normalizer::fit(&[&train]).unwrap();
        assert_eq!(n.mean, vec![4.0, 10.0]);
        assert_eq!(n.std[1], 1.0);
        let z = n.apply(&train).unwrap();
        let col: Vec<f64> = z.column(0);
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
        assert!((col.iter().map(|v| v * v).sum::<f64>() / 4.0 - 1.0).abs() < 1e-12);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        let other = matrix(1, 2, vec![4.0, 11.0]);
        assert_eq!(n.apply(&other).unwrap().data, vec![0.0, 1.0]);
        assert!(n.apply(&matrix(1, 3, vec![0.0; 3])).is_err());
    }

    #[test]
    fn layouts() {
        let m = matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let img = InputLayout::Image.to_tensor(&m).unwrap();
        assert_eq!(img.shape, vec![1, 2, 3]);
        assert_eq!(img.data, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(InputLayout::Sequence.to_tensor(&m).unwrap().shape, vec![2, 3]);
        let flat = InputLayout::Flat { frames: 4 }.to_tensor(&m).unwrap();
        assert_eq!(flat.shape, vec![4, 2]);
    }
}
