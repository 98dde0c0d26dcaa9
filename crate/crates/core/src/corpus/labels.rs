use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Emotion, Gender, Result, Utterance};

/// Emotion classes after the calm/neutral merge.
const EMOTIONS7: [Emotion; 7] = [
    Emotion::Neutral,
    Emotion::Happy,
    Emotion::Sad,
    Emotion::Angry,
    Emotion::Fearful,
    Emotion::Disgust,
    Emotion::Surprised,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Emotion6,
    Emotion7,
    GenderEmotion12,
    GenderEmotion14,
    Valence2,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Emotion6 => "emotion6",
            SchemeKind::Emotion7 => "emotion7",
            SchemeKind::GenderEmotion12 => "gender_emotion12",
            SchemeKind::GenderEmotion14 => "gender_emotion14",
            SchemeKind::Valence2 => "valence2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "emotion6" => SchemeKind::Emotion6,
            "emotion7" => SchemeKind::Emotion7,
            "gender_emotion12" => SchemeKind::GenderEmotion12,
            "gender_emotion14" => SchemeKind::GenderEmotion14,
            "valence2" => SchemeKind::Valence2,
            other => return Err(format!("unknown label scheme `{other}`")),
        })
    }
}

/// A label scheme with its ordered class names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub kind: SchemeKind,
    pub class_names: Vec<String>,
}

impl LabelScheme {
    pub fn new(kind: SchemeKind) -> Self {
        let class_names = match kind {
            SchemeKind::Valence2 => vec!["positive".to_string(), "negative".to_string()],
            _ => {
                let emotions = Self::emotion_classes(kind);
                if Self::gendered(kind) {
                    [Gender::Male, Gender::Female]
                        .iter()
                        .flat_map(|g| emotions.iter().map(move |e| format!("{}_{}", g.name(), e)))
                        .collect()
                } else {
                    emotions.iter().map(|e| e.name().to_string()).collect()
                }
            }
        };
        LabelScheme { kind, class_names }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn gendered(kind: SchemeKind) -> bool {
        matches!(kind, SchemeKind::GenderEmotion12 | SchemeKind::GenderEmotion14)
    }

    fn emotion_classes(kind: SchemeKind) -> &'static [Emotion] {
        match kind {
            SchemeKind::Emotion6 | SchemeKind::GenderEmotion12 => &EMOTIONS7[..6],
            _ => &EMOTIONS7,
        }
    }

    /// Whether the utterance has a class under this scheme.
    pub fn accepts(&self, emotion: Emotion) -> bool {
        self.label_for(emotion, Gender::Male).is_ok()
    }

    pub fn label_of(&self, u: &Utterance) -> Result<usize> {
        self.label_for(u.emotion, u.gender)
    }

    pub fn label_for(&self, emotion: Emotion, gender: Gender) -> Result<usize> {
        let emotion = emotion.merged();
        if self.kind == SchemeKind::Valence2 {
            return Ok(match emotion {
                Emotion::Neutral | Emotion::Happy | Emotion::Surprised => 0,
                _ => 1,
            });
        }
        let classes = Self::emotion_classes(self.kind);
        let idx = classes
            .iter()
            .position(|&e| e == emotion)
            .ok_or(CorpusError::Unmapped {
                emotion,
                scheme: self.kind,
            })?;
        if Self::gendered(self.kind) {
            let offset = match gender {
                Gender::Male => 0,
                Gender::Female => 1,
            };
            Ok(offset * classes.len() + idx)
        } else {
            Ok(idx)
        }
    }
}
