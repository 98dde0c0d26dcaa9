//! `SERF` tensor files: magic `SERF`, u8 version (1), u8 dtype (0 = f32 LE),
//! u8 ndim, `ndim` little-endian u32 dims, then the row-major payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureKind, FeatureMatrix, FrameConfig, Result};

pub const MAGIC: &[u8; 4] = b"SERF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

/// A decoded SERF payload.
#[derive(Debug, Clone, PartialEq)]
pub struct SerfTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn write_tensor<W: Write>(mut out: W, dims: &[usize], data: &[f32]) -> Result<()> {
    if dims.len() > u8::MAX as usize {
        return Err(FeatureError::Format(format!("{} dimensions exceed the u8 limit", dims.len())));
    }
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(FeatureError::Format(format!(
            "dims {dims:?} describe {count} values but {} were given",
            data.len()
        )));
    }
    let mut buf = Vec::with_capacity(7 + 4 * dims.len() + 4 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(DTYPE_F32);
    buf.push(dims.len() as u8);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| FeatureError::Format(format!("dim {d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut input: R) -> Result<SerfTensor> {
    let mut header = [0u8; 7];
    input
        .read_exact(&mut header)
        .map_err(|_| FeatureError::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(FeatureError::Format("bad magic bytes".into()));
    }
    if header[4] != VERSION {
        return Err(FeatureError::Format(format!("unsupported version {}", header[4])));
    }
    if header[5] != DTYPE_F32 {
        return Err(FeatureError::Format(format!("unsupported dtype {}", header[5])));
    }
    let ndim = header[6] as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut word = [0u8; 4];
    for _ in 0..ndim {
        input
            .read_exact(&mut word)
            .map_err(|_| FeatureError::Format("truncated dims".into()))?;
        dims.push(u32::from_le_bytes(word) as usize);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FeatureError::Format("dims overflow".into()))?;
    let mut bytes = vec![0u8; count * 4];
    input
        .read_exact(&mut bytes)
        .map_err(|_| FeatureError::Format("truncated payload".into()))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(SerfTensor { dims, data })
}

/// JSON sidecar stored next to a cached feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: FeatureKind,
    pub config: FrameConfig,
    pub dim_labels: Option<Vec<String>>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Write `<path>` (SERF) and `<path>.json`-style sidecar atomically (each via
/// a temporary file and rename).
pub fn save_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let data: Vec<f32> = m.data.iter().map(|&v| v as f32).collect();
    let mut buf = Vec::new();
    write_tensor(&mut buf, &[m.frames, m.dims], &data)?;
    let sidecar = Sidecar {
        kind: m.kind,
        config: m.config,
        dim_labels: m.dim_labels.clone(),
    };
    let json = serde_json::to_vec_pretty(&sidecar).map_err(|e| FeatureError::Format(e.to_string()))?;
    atomic_write(&sidecar_path(path), &json)?;
    atomic_write(path, &buf)?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<FeatureMatrix> {
    let tensor = read_tensor(fs::File::open(path)?)?;
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)
        .map_err(|e| FeatureError::Format(e.to_string()))?;
    if tensor.dims.len() != 2 {
        return Err(FeatureError::Format(format!(
            "feature matrix must be 2-D, found {} dims",
            tensor.dims.len()
        )));
    }
    let m = FeatureMatrix::new(
        sidecar.kind,
        sidecar.config,
        tensor.dims[0],
        tensor.dims[1],
        tensor.data.iter().map(|&v| v as f64).collect(),
    )?;
    Ok(match sidecar.dim_labels {
        Some(l) => m.with_labels(l),
        None => m,
    })
}

pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "tmp{}.{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_byte_layout() {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &[2, 1], &[1.0, -2.5]).unwrap();
        let mut expected = b"SERF".to_vec();
        expected.extend_from_slice(&[1, 0, 2]);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &[3], &[1.0, 2.0, 3.0]).unwrap();
        assert!(read_tensor(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_tensor(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad[5] = 7;
        assert!(read_tensor(&bad[..]).is_err());
        assert!(write_tensor(Vec::new(), &[2, 2], &[1.0]).is_err());
    }

    #[test]
    fn matrix_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.serf");
        let m = FeatureMatrix::new(FeatureKind::Logmel, FrameConfig::logmel_default(), 2, 3, vec![0.5, 1.0, 2.0, -1.0, 0.25, 8.0])
            .unwrap()
            .with_labels(vec!["a".into(), "b".into(), "c".into()]);
        save_matrix(&path, &m).unwrap();
        assert_eq!(load_matrix(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn tensor_round_trip(dims in proptest::collection::vec(1usize..5, 0..4), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| (i as f32 + seed as f32).sin()).collect();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &dims, &data).unwrap();
            let back = read_tensor(&buf[..]).unwrap();
            prop_assert_eq!(back.dims, dims);
            prop_assert_eq!(back.data, data);
        }
    }
}
