use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AtStage, Result, Stage};
use crate::audio::{write_wav_pcm16, Waveform};
use crate::corpus::{Emotion, Gender, Intensity, SplitSpec, Utterance};
use crate::seed::derive_seed;

/// Emotions standing in for the three synthetic classes.
pub const SYNTHETIC_EMOTIONS: [Emotion; 3] = [Emotion::Neutral, Emotion::Happy, Emotion::Angry];

/// Carrier pitch (Hz), amplitude-modulation rate (Hz) and noise floor (dB
/// relative to the signal peak) per class.
const CLASS_PARAMS: [(f64, f64, f64); 3] = [(120.0, 2.0, -45.0), (220.0, 5.0, -35.0), (340.0, 9.0, -25.0)];

/// A small labeled corpus of synthetic "emotions" with speaker variation.
/// Speakers never cross split boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub train_speakers: u32,
    pub val_speakers: u32,
    pub test_speakers: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sample_rate: 8000,
            duration_s: 1.0,
            n_train: 60,
            n_val: 20,
            n_test: 20,
            train_speakers: 12,
            val_speakers: 4,
            test_speakers: 4,
        }
    }
}

impl SyntheticConfig {
    /// Actor sets matching the generated speakers (actors are 1-based).
    pub fn split_spec(&self) -> SplitSpec {
        let a = self.train_speakers;
        let b = a + self.val_speakers;
        let c = b + self.test_speakers;
        SplitSpec {
            train_actors: (1..=a).collect(),
            val_actors: (a + 1..=b).collect(),
            test_actors: (b + 1..=c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub utterance: Utterance,
    pub class: usize,
    pub waveform: Waveform,
}

struct Speaker {
    pitch: f64,
    rate: f64,
    tilt: f64,
}

fn speaker(seed: u64, actor: u32) -> Speaker {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1_000_000 + actor as u64));
    Speaker {
        pitch: rng.random_range(0.92..1.08),
        rate: rng.random_range(0.85..1.15),
        tilt: rng.random_range(0.45..0.9),
    }
}

fn synthesize(cfg: &SyntheticConfig, class: usize, spk: &Speaker, rng: &mut ChaCha8Rng) -> Result<Waveform> {
    let (f0, am, noise_db) = CLASS_PARAMS[class];
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let f0 = f0 * spk.pitch * rng.random_range(0.97..1.03);
    let am = am * spk.rate;
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let vibrato = rng.random_range(3.0..6.0);
    let gain = rng.random_range(0.3..0.8);
    let noise = Normal::new(0.0, 10f64.powf(noise_db / 20.0)).expect("positive deviation");
    let harmonics: Vec<f64> = (0..5).map(|h| spk.tilt.powi(h)).collect();
    let norm: f64 = harmonics.iter().sum();
    let mut phase = rng.random_range(0.0..2.0 * PI);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sr;
        phase += 2.0 * PI * f0 * (1.0 + 0.01 * (2.0 * PI * vibrato * t).sin()) / sr;
        let tone: f64 = harmonics
            .iter()
            .enumerate()
            .filter(|(h, _)| (*h as f64 + 1.0) * f0 < 0.45 * sr)
            .map(|(h, a)| a * ((h as f64 + 1.0) * phase).sin())
            .sum::<f64>()
            / norm;
        let env = 0.55 + 0.45 * (2.0 * PI * am * t + am_phase).sin();
        let x = gain * (env * tone + noise.sample(rng));
        samples.push(x.clamp(-1.0, 1.0) as f32);
    }
    Waveform::new(samples, cfg.sample_rate).at(Stage::Ingest)
}

/// Generate the corpus in memory. Utterances come out train, val, test, and
/// within a split consecutive triples share a speaker and cover all classes.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<Vec<SyntheticUtterance>> {
    let splits = [
        (cfg.n_train, 1, cfg.train_speakers),
        (cfg.n_val, 1 + cfg.train_speakers, cfg.val_speakers),
        (cfg.n_test, 1 + cfg.train_speakers + cfg.val_speakers, cfg.test_speakers),
    ];
    let mut out = Vec::new();
    let mut counts = std::collections::BTreeMap::<(u32, usize), u8>::new();
    for (count, first_actor, n_speakers) in splits {
        if count > 0 && n_speakers == 0 {
            return Err(super::HarnessError::new(Stage::Config, "synthetic split has utterances but no speakers"));
        }
        for i in 0..count {
            let class = i % 3;
            let actor = first_actor + (i as u32 / 3) % n_speakers;
            let k = counts.entry((actor, class)).or_insert(0);
            let j = *k;
            *k += 1;
            if j >= 8 {
                return Err(super::HarnessError::new(
                    Stage::Config,
                    format!("more than 8 utterances of one class for synthetic speaker {actor}"),
                ));
            }
            let spk = speaker(seed, actor);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, out.len() as u64));
            let waveform = synthesize(cfg, class, &spk, &mut rng)?;
            let mut utterance = Utterance {
                id: String::new(),
                path: PathBuf::new(),
                modality: 3,
                vocal_channel: 1,
                emotion: SYNTHETIC_EMOTIONS[class],
                intensity: if (j / 4) % 2 == 0 { Intensity::Normal } else { Intensity::Strong },
                statement: 1 + j % 2,
                repetition: 1 + (j / 2) % 2,
                actor,
                gender: Gender::from_actor(actor),
            };
            utterance.id = utterance.ravdess_stem();
            utterance.path = PathBuf::from(format!("Actor_{actor:02}/{}.wav", utterance.id));
            out.push(SyntheticUtterance {
                utterance,
                class,
                waveform,
            });
        }
    }
    Ok(out)
}

/// Write the corpus as 16-bit WAVs in the RAVDESS layout
/// (`Actor_XX/03-01-EE-II-SS-RR-AA.wav`).
pub fn write_synthetic_corpus(dir: &Path, cfg: &SyntheticConfig, seed: u64) -> Result<Vec<PathBuf>> {
    let corpus = generate_synthetic(cfg, seed)?;
    let mut paths = Vec::with_capacity(corpus.len());
    for u in &corpus {
        let path = dir.join(&u.utterance.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).at_ctx(Stage::Ingest, parent.display())?;
        }
        write_wav_pcm16(&path, &u.waveform).at(Stage::Ingest)?;
        paths.push(path);
    }
    Ok(paths)
}
