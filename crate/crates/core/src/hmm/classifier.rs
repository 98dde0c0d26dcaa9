use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{forward_loglik, HmmModel, SequenceModel};
use super::train::{baum_welch_fit, FitConfig};
use super::{HmmError, Result};
use crate::features::FeatureMatrix;
use crate::seed::derive_seed;

pub const HMM_FORMAT_VERSION: u32 = 1;

/// One generative model per label; prediction is the label whose model
/// gives the highest sequence log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmClassifier {
    pub version: u32,
    pub class_names: Vec<String>,
    pub fit: FitConfig,
    pub models: Vec<HmmModel>,
    /// Per-label training log-likelihood history.
    pub histories: Vec<Vec<f64>>,
}

/// Train one model per entry of `class_names`. Label `i` is fitted with seed
/// `derive_seed(cfg.seed, i)`; labels train in parallel but the result does
/// not depend on scheduling.
pub fn train_classifier(train: &[(&FeatureMatrix, usize)], class_names: &[String], cfg: &FitConfig) -> Result<HmmClassifier> {
    let n = class_names.len();
    let mut by_label: Vec<Vec<&FeatureMatrix>> = vec![Vec::new(); n];
    for &(m, label) in train {
        if label >= n {
            return Err(HmmError::Invalid(format!("label {label} outside {n} classes")));
        }
        by_label[label].push(m);
    }
    if let Some(i) = by_label.iter().position(|v| v.is_empty()) {
        return Err(HmmError::NoData {
            label: class_names[i].clone(),
        });
    }
    let fits = by_label
        .par_iter()
        .enumerate()
        .map(|(i, seqs)| {
            let label_cfg = FitConfig {
                seed: derive_seed(cfg.seed, i as u64),
                ..cfg.clone()
            };
            baum_welch_fit(seqs, &label_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, histories) = fits.into_iter().map(|f| (f.model, f.history)).unzip();
    Ok(HmmClassifier {
        version: HMM_FORMAT_VERSION,
        class_names: class_names.to_vec(),
        fit: cfg.clone(),
        models,
        histories,
    })
}

impl HmmClassifier {
    pub fn n_classes(&self) -> usize {
        self.models.len()
    }

    pub fn dims(&self) -> usize {
        self.models.first().map_or(0, |m| m.dims())
    }

    /// Per-label log-likelihoods and their argmax (ties go to the lowest label).
    pub fn classify(&self, obs: &FeatureMatrix) -> Result<(usize, Vec<f64>)> {
        let lls = self
            .models
            .iter()
            .map(|m| forward_loglik(m, obs))
            .collect::<Result<Vec<_>>>()?;
        Ok((argmax(&lls), lls))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| HmmError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: HmmClassifier = serde_json::from_str(s).map_err(|e| HmmError::Format(e.to_string()))?;
        if c.version != HMM_FORMAT_VERSION {
            return Err(HmmError::Format(format!("unsupported version {}", c.version)));
        }
        if c.models.len() != c.class_names.len() {
            return Err(HmmError::Format(format!(
                "{} models for {} classes",
                c.models.len(),
                c.class_names.len()
            )));
        }
        for m in &c.models {
            m.validate(f64::MIN_POSITIVE)?;
        }
        Ok(c)
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] || xs[best].is_nan() && !x.is_nan() {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelScheme, SchemeKind};
    use crate::features::{FeatureKind, FrameConfig};
    use crate::hmm::GaussianHmm;
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(frames: usize, dims: usize, data: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(FeatureKind::Stacked, FrameConfig::mfcc_default(), frames, dims, data).unwrap()
    }

    fn generator(offset: f64) -> GaussianHmm {
        GaussianHmm::new(
            vec![0.5, 0.5],
            vec![0.8, 0.2, 0.3, 0.7],
            vec![offset, offset + 1.0, offset - 1.0, offset],
            vec![0.5; 4],
            2,
        )
        .unwrap()
    }

    fn labeled(n_labels: usize, per_label: usize, seed: u64) -> Vec<(FeatureMatrix, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_labels)
            .flat_map(|l| (0..per_label).map(move |_| l))
            .map(|l| (matrix(30, 2, generator(4.0 * l as f64).sample(30, &mut rng).1), l))
            .collect()
    }

    fn cfg() -> FitConfig {
        FitConfig {
            n_states: 2,
            max_iter: 10,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn one_model_per_label_and_correct_predictions() {
        let scheme = LabelScheme::new(SchemeKind::Valence2);
        let data = labeled(2, 8, 1);
        let refs: Vec<(&FeatureMatrix, usize)> = data.iter().map(|(m, l)| (m, *l)).collect();
        let c = train_classifier(&refs, &scheme.class_names, &cfg()).unwrap();
        assert_eq!(c.models.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for label in 0..2 {
            let obs = matrix(30, 2, generator(4.0 * label as f64).sample(30, &mut rng).1);
            let (pred, lls) = c.classify(&obs).unwrap();
            assert_eq!(pred, label);
            assert_eq!(lls.len(), 2);
        }
    }

    #[test]
    fn fourteen_label_scheme() {
        let scheme = LabelScheme::new(SchemeKind::GenderEmotion14);
        let data = labeled(14, 2, 2);
        let refs: Vec<(&FeatureMatrix, usize)> = data.iter().map(|(m, l)| (m, *l)).collect();
        let c = train_classifier(&refs, &scheme.class_names, &cfg()).unwrap();
        assert_eq!(c.n_classes(), 14);
    }

    #[test]
    fn missing_label_is_named() {
        let scheme = LabelScheme::new(SchemeKind::Valence2);
        let data = labeled(1, 3, 3);
        let refs: Vec<(&FeatureMatrix, usize)> = data.iter().map(|(m, l)| (m, *l)).collect();
        match train_classifier(&refs, &scheme.class_names, &cfg()) {
            Err(HmmError::NoData { label }) => assert_eq!(label, scheme.class_names[1]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bitwise_deterministic_and_serializable() {
        let scheme = LabelScheme::new(SchemeKind::Valence2);
        let data = labeled(2, 5, 4);
        let refs: Vec<(&FeatureMatrix, usize)> = data.iter().map(|(m, l)| (m, *l)).collect();
        let c = FitConfig { n_components: 2, ..cfg() };
        let a = train_classifier(&refs, &scheme.class_names, &c).unwrap();
        let b = train_classifier(&refs, &scheme.class_names, &c).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = HmmClassifier::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn identical_models_tie_to_label_zero() {
        let scheme = LabelScheme::new(SchemeKind::Valence2);
        let m = HmmModel::Gaussian(generator(0.0));
        let c = HmmClassifier {
            version: HMM_FORMAT_VERSION,
            class_names: scheme.class_names.clone(),
            fit: cfg(),
            models: vec![m.clone(), m],
            histories: vec![vec![], vec![]],
        };
        let (pred, lls) = c.classify(&matrix(3, 2, vec![0.3; 6])).unwrap();
        assert_eq!(pred, 0);
        assert_eq!(lls[0], lls[1]);
    }

    proptest! {
        #[test]
        fn argmax_shift_invariant(xs in prop::collection::vec(-1e3f64..1e3, 1..20), c in -1e3f64..1e3) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            // shifting can merge nearly-equal values through rounding; compare values, not indices
            let a = argmax(&xs);
            let b = argmax(&shifted);
            prop_assert!(a == b || (xs[a] - xs[b]).abs() <= 1e-9 * xs[a].abs().max(1.0));
        }
    }
}
