//! Corpus metadata: RAVDESS filename parsing, label schemes, speaker-independent
//! splits and labeled CSV manifests for external datasets.

mod labels;
mod manifest;
mod ravdess;
mod split;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use labels::{LabelScheme, SchemeKind};
pub use manifest::{ingest_manifest, parse_emotion, EXTERNAL_ACTOR_BASE};
pub use ravdess::{parse_ravdess_filename, scan_corpus, ScanSummary};
pub use split::{split, Split, SplitSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed filename `{name}`: {reason}")]
    Parse { name: String, reason: String },
    #[error("field `{field}` in `{name}`: {reason}")]
    Field {
        name: String,
        field: &'static str,
        reason: String,
    },
    #[error("emotion `{emotion}` is not representable in scheme {scheme}")]
    Unmapped { emotion: Emotion, scheme: SchemeKind },
    #[error("split configuration: {0}")]
    Config(String),
    #[error("manifest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },
    #[error("manifest {path}, row {row}: {reason}")]
    IngestRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// The eight RAVDESS emotions, in code order (01..08).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Calm,
    Happy,
    Sad,
    Angry,
    Fearful,
    Disgust,
    Surprised,
}

impl Emotion {
    pub const ALL: [Emotion; 8] = [
        Emotion::Neutral,
        Emotion::Calm,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Fearful,
        Emotion::Disgust,
        Emotion::Surprised,
    ];

    /// RAVDESS emotion code.
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Calm => "calm",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Fearful => "fearful",
            Emotion::Disgust => "disgust",
            Emotion::Surprised => "surprised",
        }
    }

    /// Calm and neutral are treated as one class by every label scheme.
    pub fn merged(self) -> Self {
        match self {
            Emotion::Calm => Emotion::Neutral,
            e => e,
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Normal,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    /// RAVDESS convention: odd actors are male, even actors female.
    pub fn from_actor(actor: u32) -> Self {
        if actor % 2 == 1 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

/// One corpus recording with its decoded metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub path: PathBuf,
    /// 1 = audio-video, 2 = video-only, 3 = audio-only.
    pub modality: u8,
    /// 1 = speech, 2 = song.
    pub vocal_channel: u8,
    pub emotion: Emotion,
    pub intensity: Intensity,
    pub statement: u8,
    pub repetition: u8,
    pub actor: u32,
    pub gender: Gender,
}

impl Utterance {
    pub fn is_external(&self) -> bool {
        self.actor >= EXTERNAL_ACTOR_BASE
    }

    pub fn is_audio_only_speech(&self) -> bool {
        self.modality == 3 && self.vocal_channel == 1
    }

    /// The seven RAVDESS codes in filename order.
    pub fn ravdess_codes(&self) -> [u32; 7] {
        [
            self.modality as u32,
            self.vocal_channel as u32,
            self.emotion.code() as u32,
            match self.intensity {
                Intensity::Normal => 1,
                Intensity::Strong => 2,
            },
            self.statement as u32,
            self.repetition as u32,
            self.actor,
        ]
    }

    pub fn ravdess_stem(&self) -> String {
        self.ravdess_codes()
            .iter()
            .map(|c| format!("{c:02}"))
            .collect::<Vec<_>>()
            .join("-")
    }
}
