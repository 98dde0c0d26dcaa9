use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioError, Result, Waveform};

/// Decode PCM16, PCM24 or float32 WAV (1–2 channels) to a mono waveform.
/// Channels are averaged; integer samples are scaled by `1/2^(bits-1)`.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let decode = |reason: String| AudioError::Decode {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = WavReader::open(path).map_err(|e| decode(e.to_string()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(decode(format!("{channels} channels (expected 1 or 2)")));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (bits - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| decode(e.to_string()))?
        }
        (SampleFormat::Float, 32) => {
            let samples: Vec<f32> = reader
                .samples::<f32>()
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| decode(e.to_string()))?;
            if samples.iter().any(|s| !s.is_finite()) {
                return Err(decode("non-finite float sample".into()));
            }
            samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect()
        }
        (fmt, bits) => return Err(decode(format!("unsupported codec {fmt:?} {bits}-bit"))),
    };
    if interleaved.is_empty() {
        return Err(decode("zero-length data chunk".into()));
    }
    if interleaved.len() % channels != 0 {
        return Err(decode("truncated sample frame".into()));
    }
    let mono = interleaved
        .chunks_exact(channels)
        .map(|c| c.iter().sum::<f32>() / channels as f32)
        .collect();
    Waveform::new(mono, spec.sample_rate)
}

/// Write a mono 16-bit little-endian PCM WAV, clipping to `[-1, 1]`.
pub fn write_wav_pcm16(path: &Path, w: &Waveform) -> Result<()> {
    let encode = |reason: String| AudioError::Encode {
        path: path.display().to_string(),
        reason,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| encode(e.to_string()))?;
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| encode(e.to_string()))?;
    for &s in &w.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| encode(e.to_string()))?;
    }
    writer.finalize().map_err(|e| encode(e.to_string()))
}
