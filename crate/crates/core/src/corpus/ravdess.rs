use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{CorpusError, Emotion, Gender, Intensity, Result, Utterance};

const FIELDS: [&str; 7] = [
    "modality",
    "vocal_channel",
    "emotion",
    "intensity",
    "statement",
    "repetition",
    "actor",
];

/// Valid inclusive code range per field.
const RANGES: [(u32, u32); 7] = [(1, 3), (1, 2), (1, 8), (1, 2), (1, 2), (1, 2), (1, 24)];

/// Parse a `NN-NN-NN-NN-NN-NN-NN[.ext]` RAVDESS filename. Any leading
/// directories are ignored; the path is recorded as given.
pub fn parse_ravdess_filename(name: &str) -> Result<Utterance> {
    let path = PathBuf::from(name);
    let file = path
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or(name)
        .to_string();
    let stem = match file.find('.') {
        Some(i) => &file[..i],
        None => file.as_str(),
    };
    let parts: Vec<&str> = stem.split('-').collect();
    if parts.len() != 7 {
        return Err(CorpusError::Parse {
            name: file.clone(),
            reason: format!("expected 7 dash-separated fields, found {}", parts.len()),
        });
    }

    let mut codes = [0u32; 7];
    for (i, part) in parts.iter().enumerate() {
        let field = FIELDS[i];
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CorpusError::Field {
                name: file.clone(),
                field,
                reason: format!("`{part}` is not numeric"),
            });
        }
        let value: u32 = part.parse().map_err(|_| CorpusError::Field {
            name: file.clone(),
            field,
            reason: format!("`{part}` is not a valid integer"),
        })?;
        let (lo, hi) = RANGES[i];
        if !(lo..=hi).contains(&value) {
            return Err(CorpusError::Field {
                name: file.clone(),
                field,
                reason: format!("code {value} out of range {lo}..={hi}"),
            });
        }
        codes[i] = value;
    }

    let emotion = Emotion::from_code(codes[2] as u8).expect("range checked");
    let intensity = if codes[3] == 1 {
        Intensity::Normal
    } else {
        Intensity::Strong
    };
    if emotion == Emotion::Neutral && intensity == Intensity::Strong {
        return Err(CorpusError::Field {
            name: file,
            field: "intensity",
            reason: "neutral recordings only exist at normal intensity".into(),
        });
    }
    let actor = codes[6];

    Ok(Utterance {
        id: stem.to_string(),
        path,
        modality: codes[0] as u8,
        vocal_channel: codes[1] as u8,
        emotion,
        intensity,
        statement: codes[4] as u8,
        repetition: codes[5] as u8,
        actor,
        gender: Gender::from_actor(actor),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanSummary {
    pub wav_files: usize,
    pub unparsed: Vec<PathBuf>,
}

/// Recursively collect every parseable RAVDESS `.wav` below `root`, sorted
/// lexicographically by path.
pub fn scan_corpus(root: &Path) -> Result<(Vec<Utterance>, ScanSummary)> {
    if !root.is_dir() {
        return Err(CorpusError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root not found"),
        });
    }
    let mut out = Vec::new();
    let mut summary = ScanSummary::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        let path = entry.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !entry.file_type().is_file() || !is_wav {
            continue;
        }
        summary.wav_files += 1;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        match parse_ravdess_filename(name) {
            Ok(mut u) => {
                u.path = path.to_path_buf();
                out.push(u);
            }
            Err(_) => summary.unparsed.push(path.to_path_buf()),
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_fearful_female() {
        let u = parse_ravdess_filename("03-01-06-01-02-01-12.wav").unwrap();
        assert_eq!(u.emotion, Emotion::Fearful);
        assert_eq!(u.intensity, Intensity::Normal);
        assert_eq!(u.statement, 2);
        assert_eq!(u.repetition, 1);
        assert_eq!(u.actor, 12);
        assert_eq!(u.gender, Gender::Female);
        assert_eq!(u.id, "03-01-06-01-02-01-12");
    }

    #[test]
    fn odd_actor_is_male() {
        let u = parse_ravdess_filename("03-01-01-01-01-01-11.wav").unwrap();
        assert_eq!(u.actor, 11);
        assert_eq!(u.gender, Gender::Male);
    }

    #[test]
    fn emotion_code_out_of_range() {
        let err = parse_ravdess_filename("03-01-09-01-01-01-01.wav").unwrap_err();
        match err {
            CorpusError::Field { field, .. } => assert_eq!(field, "emotion"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            parse_ravdess_filename("03-01-06-01-02-12.wav"),
            Err(CorpusError::Parse { .. })
        ));
        assert!(matches!(
            parse_ravdess_filename("03-01-x6-01-02-01-12.wav"),
            Err(CorpusError::Field { field: "emotion", .. })
        ));
        assert!(matches!(
            parse_ravdess_filename("03-01-06-01-02-01-25.wav"),
            Err(CorpusError::Field { field: "actor", .. })
        ));
        assert!(matches!(
            parse_ravdess_filename("03-01-01-02-01-01-01.wav"),
            Err(CorpusError::Field { field: "intensity", .. })
        ));
    }

    #[test]
    fn extension_and_directories_ignored() {
        let u = parse_ravdess_filename("Actor_01/03-02-05-02-01-02-01.WAV").unwrap();
        assert_eq!(u.vocal_channel, 2);
        assert_eq!(u.emotion, Emotion::Angry);
        assert_eq!(u.intensity, Intensity::Strong);
        let bare = parse_ravdess_filename("03-01-05-02-01-02-01").unwrap();
        assert_eq!(bare.actor, 1);
    }

    proptest! {
        #[test]
        fn codes_round_trip(
            modality in 1u32..=3, channel in 1u32..=2, emotion in 1u32..=8,
            intensity in 1u32..=2, statement in 1u32..=2, repetition in 1u32..=2,
            actor in 1u32..=24,
        ) {
            let intensity = if emotion == 1 { 1 } else { intensity };
            let codes = [modality, channel, emotion, intensity, statement, repetition, actor];
            let stem = codes.iter().map(|c| format!("{c:02}")).collect::<Vec<_>>().join("-");
            let u = parse_ravdess_filename(&format!("{stem}.wav")).unwrap();
            prop_assert_eq!(u.ravdess_codes(), codes);
            prop_assert_eq!(u.ravdess_stem(), stem);
            prop_assert_eq!(u.gender == Gender::Male, actor % 2 == 1);
        }
    }
}
