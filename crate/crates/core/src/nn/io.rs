//! Model files: magic `SERC`, u8 version, u32 LE manifest length, a JSON
//! manifest, then one SERF tensor per parameter in network order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::spec::ModelSpec;
use super::tensor::Tensor;
use super::{NnError, Result};
use crate::features::serf::{atomic_write, read_tensor, write_tensor};

pub const SERC_MAGIC: &[u8; 4] = b"SERC";
pub const SERC_VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u8,
    spec: ModelSpec,
    input_shape: Vec<usize>,
    param_shapes: Vec<Vec<usize>>,
    metadata: serde_json::Value,
}

/// A loaded network plus caller-defined metadata (normalization, pipeline).
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub network: Network<f32>,
    pub metadata: serde_json::Value,
}

fn fmt_err(e: impl std::fmt::Display) -> NnError {
    NnError::Format(e.to_string())
}

pub fn write_model<W: Write>(mut out: W, net: &Network<f32>, metadata: &serde_json::Value) -> Result<()> {
    let manifest = Manifest {
        version: SERC_VERSION,
        spec: net.spec.clone(),
        input_shape: net.input_shape.clone(),
        param_shapes: net.params.iter().map(|p| p.shape.clone()).collect(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&manifest).map_err(fmt_err)?;
    let len = u32::try_from(json.len()).map_err(|_| NnError::Format("manifest too large".into()))?;
    out.write_all(SERC_MAGIC)?;
    out.write_all(&[SERC_VERSION])?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(&json)?;
    for p in &net.params {
        write_tensor(&mut out, &p.shape, &p.data).map_err(fmt_err)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut input: R) -> Result<ModelFile> {
    let mut header = [0u8; 9];
    input.read_exact(&mut header).map_err(|_| NnError::Format("truncated header".into()))?;
    if &header[..4] != SERC_MAGIC {
        return Err(NnError::Format("bad magic bytes".into()));
    }
    if header[4] != SERC_VERSION {
        return Err(NnError::Format(format!("unsupported version {}", header[4])));
    }
    let len = u32::from_le_bytes([header[5], header[6], header[7], header[8]]) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json).map_err(|_| NnError::Format("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&json).map_err(fmt_err)?;
    if manifest.version != SERC_VERSION {
        return Err(NnError::Format(format!("manifest version {} unsupported", manifest.version)));
    }
    let mut params = Vec::with_capacity(manifest.param_shapes.len());
    for shape in &manifest.param_shapes {
        let t = read_tensor(&mut input).map_err(fmt_err)?;
        if &t.dims != shape {
            return Err(NnError::Format(format!("tensor dims {:?} differ from manifest {shape:?}", t.dims)));
        }
        params.push(Tensor::new(t.dims, t.data)?);
    }
    let network = Network::from_params(manifest.spec, &manifest.input_shape, params)?;
    Ok(ModelFile { network, metadata: manifest.metadata })
}

pub fn save_model(path: &Path, net: &Network<f32>, metadata: &serde_json::Value) -> Result<()> {
    let mut buf = Vec::new();
    write_model(&mut buf, net, metadata)?;
    atomic_write(path, &buf)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path)?;
    read_model(bytes.as_slice())
}
