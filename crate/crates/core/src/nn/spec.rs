use serde::{Deserialize, Serialize};

use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { out: usize },
    Conv2d { out_ch: usize, kh: usize, kw: usize, stride: usize, pad: usize },
    Conv1d { out_ch: usize, k: usize, stride: usize, pad: usize },
    Maxpool2d { kh: usize, kw: usize, stride: usize },
    GlobalAvgPool,
    Relu,
    Flatten,
    SoftmaxOutput { n_classes: usize },
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } | LayerSpec::Conv1d { .. })
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| NnError::Shape(format!("{self:?} cannot take {what} input {input:?}"));
        match *self {
            LayerSpec::Dense { out } => match input {
                [_] if out > 0 => Ok(vec![out]),
                _ => Err(bad("non-vector")),
            },
            LayerSpec::Conv2d { out_ch, kh, kw, stride, pad } => match *input {
                [c, h, w] => {
                    let g = super::ops::ConvGeom::new(c, h, w, out_ch, kh, kw, stride, stride, pad, pad)?;
                    Ok(vec![out_ch, g.ho, g.wo])
                }
                _ => Err(bad("non-[C, H, W]")),
            },
            LayerSpec::Conv1d { out_ch, k, stride, pad } => match *input {
                [c, l] => {
                    let g = super::ops::ConvGeom::new(c, 1, l, out_ch, 1, k, 1, stride, 0, pad)?;
                    Ok(vec![out_ch, g.wo])
                }
                _ => Err(bad("non-[C, L]")),
            },
            LayerSpec::Maxpool2d { kh, kw, stride } => match *input {
                [c, h, w] => {
                    let g = super::ops::PoolGeom::new(c, h, w, kh, kw, stride)?;
                    Ok(vec![c, g.ho, g.wo])
                }
                [c, l] => {
                    let g = super::ops::PoolGeom::new(c, 1, l, 1, kw, stride)?;
                    Ok(vec![c, g.wo])
                }
                _ => Err(bad("rank other than 2 or 3")),
            },
            LayerSpec::GlobalAvgPool => match input {
                [c, _, ..] => Ok(vec![*c]),
                _ => Err(bad("rank < 2")),
            },
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::SoftmaxOutput { n_classes } => match input {
                [n] if *n == n_classes => Ok(vec![n_classes]),
                _ => Err(bad(&format!("a non-[{n_classes}]"))),
            },
        }
    }
}

/// Ordered layer list ending in a softmax output, plus the init seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn n_classes(&self) -> Result<usize> {
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOutput { n_classes }) if *n_classes > 0 => Ok(*n_classes),
            _ => Err(NnError::Spec("final layer must be softmax_output".into())),
        }
    }

    /// Per-sample shapes after every layer, starting with `input`.
    pub fn shapes(&self, input: &[usize]) -> Result<Vec<Vec<usize>>> {
        self.n_classes()?;
        if let Some(i) = self.layers[..self.layers.len() - 1]
            .iter()
            .position(|l| matches!(l, LayerSpec::SoftmaxOutput { .. }))
        {
            return Err(NnError::Spec(format!("softmax_output at layer {i} is not last")));
        }
        let mut shapes = vec![input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().expect("non-empty"))
                .map_err(|e| NnError::Spec(format!("layer {i}: {e}")))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self, input: &[usize]) -> Result<()> {
        self.shapes(input).map(|_| ())
    }
}

/// conv(16, 12×12) → conv(32, 7×7) → conv(64, 3×3) → conv(64, 3×3), each
/// followed by relu and max pooling (2×2/2, the last 4×4/4), then global
/// average pooling and a dense softmax head. Input `[1, mels, frames]`.
pub fn build_champion_cnn(n_classes: usize) -> ModelSpec {
    let conv = |out_ch, k| LayerSpec::Conv2d { out_ch, kh: k, kw: k, stride: 1, pad: k / 2 };
    let pool = |k| LayerSpec::Maxpool2d { kh: k, kw: k, stride: k };
    ModelSpec {
        layers: vec![
            conv(16, 12),
            LayerSpec::Relu,
            pool(2),
            conv(32, 7),
            LayerSpec::Relu,
            pool(2),
            conv(64, 3),
            LayerSpec::Relu,
            pool(2),
            conv(64, 3),
            LayerSpec::Relu,
            pool(4),
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense { out: n_classes },
            LayerSpec::SoftmaxOutput { n_classes },
        ],
        seed: 0,
    }
}

/// Two 3×3 conv layers with 2×2/2 max pooling, then global average pooling.
pub fn build_shallow_cnn(n_classes: usize) -> ModelSpec {
    let conv = |out_ch| LayerSpec::Conv2d { out_ch, kh: 3, kw: 3, stride: 1, pad: 1 };
    let pool = LayerSpec::Maxpool2d { kh: 2, kw: 2, stride: 2 };
    ModelSpec {
        layers: vec![
            conv(16),
            LayerSpec::Relu,
            pool,
            conv(32),
            LayerSpec::Relu,
            pool,
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense { out: n_classes },
            LayerSpec::SoftmaxOutput { n_classes },
        ],
        seed: 0,
    }
}

/// Flatten → 256 → 128 → 64 (relu) → dense softmax.
pub fn build_dnn(n_classes: usize) -> ModelSpec {
    ModelSpec {
        layers: vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { out: 256 },
            LayerSpec::Relu,
            LayerSpec::Dense { out: 128 },
            LayerSpec::Relu,
            LayerSpec::Dense { out: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { out: n_classes },
            LayerSpec::SoftmaxOutput { n_classes },
        ],
        seed: 0,
    }
}

/// Four 1D conv layers over time with feature dimensions as channels.
/// Input `[dims, frames]`.
pub fn build_cnn1d(n_classes: usize) -> ModelSpec {
    let conv = |out_ch, k| LayerSpec::Conv1d { out_ch, k, stride: 1, pad: k / 2 };
    let pool = |k| LayerSpec::Maxpool2d { kh: 1, kw: k, stride: k };
    ModelSpec {
        layers: vec![
            conv(64, 9),
            LayerSpec::Relu,
            pool(2),
            conv(64, 5),
            LayerSpec::Relu,
            pool(2),
            conv(128, 3),
            LayerSpec::Relu,
            pool(2),
            conv(128, 3),
            LayerSpec::Relu,
            pool(4),
            LayerSpec::GlobalAvgPool,
            LayerSpec::Dense { out: n_classes },
            LayerSpec::SoftmaxOutput { n_classes },
        ],
        seed: 0,
    }
}
