use std::path::Path;

use super::{CorpusError, Emotion, Gender, Intensity, Result, Utterance};

/// Actor ids at or above this value mark manifest (external) utterances;
/// they never fall into a RAVDESS actor split.
pub const EXTERNAL_ACTOR_BASE: u32 = 1000;

/// Map a free-form emotion name, including common external-dataset aliases,
/// to an [`Emotion`].
pub fn parse_emotion(name: &str) -> Option<Emotion> {
    let key = name.trim().to_ascii_lowercase();
    Some(match key.as_str() {
        "neutral" => Emotion::Neutral,
        "calm" => Emotion::Calm,
        "happy" | "happiness" | "joy" => Emotion::Happy,
        "sad" | "sadness" => Emotion::Sad,
        "angry" | "anger" => Emotion::Angry,
        "fearful" | "fear" => Emotion::Fearful,
        "disgust" | "disgusted" => Emotion::Disgust,
        "surprised" | "surprise" | "pleasant_surprise" | "pleasant_surprised" | "ps" => {
            Emotion::Surprised
        }
        _ => return None,
    })
}

fn parse_gender(name: &str) -> Option<Gender> {
    match name.trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Some(Gender::Male),
        "female" | "f" => Some(Gender::Female),
        _ => None,
    }
}

/// Read a `path,emotion,gender[,intensity]` CSV manifest. Relative paths are
/// resolved against the manifest's directory; every row gets its own
/// external actor id.
pub fn ingest_manifest(path: &Path) -> Result<Vec<Utterance>> {
    let ingest_err = |reason: String| CorpusError::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| ingest_err(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(path_col), Some(emotion_col), Some(gender_col)) =
        (column("path"), column("emotion"), column("gender"))
    else {
        return Err(ingest_err(
            "header must contain path, emotion and gender columns".into(),
        ));
    };
    let intensity_col = column("intensity");
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let row_err = |reason: String| CorpusError::IngestRow {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let record = record.map_err(|e| row_err(e.to_string()))?;
        let field = |col: usize, name: &str| {
            record
                .get(col)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| row_err(format!("missing {name}")))
        };
        let rel = field(path_col, "path")?;
        let emotion_str = field(emotion_col, "emotion")?;
        let emotion = parse_emotion(emotion_str)
            .ok_or_else(|| row_err(format!("unknown emotion `{emotion_str}`")))?;
        let gender_str = field(gender_col, "gender")?;
        let gender = parse_gender(gender_str)
            .ok_or_else(|| row_err(format!("unknown gender `{gender_str}`")))?;
        let intensity = match intensity_col.and_then(|c| record.get(c)).filter(|v| !v.is_empty()) {
            None => Intensity::Normal,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "normal" | "1" => Intensity::Normal,
                "strong" | "2" => Intensity::Strong,
                other => return Err(row_err(format!("unknown intensity `{other}`"))),
            },
        };
        let full = base.join(rel);
        let id = Path::new(rel)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(rel)
            .to_string();
        out.push(Utterance {
            id,
            path: full,
            modality: 3,
            vocal_channel: 1,
            emotion,
            intensity,
            statement: 0,
            repetition: 0,
            actor: EXTERNAL_ACTOR_BASE + out.len() as u32,
            gender,
        });
    }
    Ok(out)
}
