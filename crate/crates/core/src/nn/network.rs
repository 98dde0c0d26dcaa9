use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{self, ConvGeom, PoolGeom};
use super::spec::{LayerSpec, ModelSpec};
use super::tensor::{Real, Tensor};
use super::{NnError, Result};

/// A built model: spec, the per-sample input shape it was built for, and
/// parameters (weight then bias for every parametric layer, in order).
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: ModelSpec,
    pub input_shape: Vec<usize>,
    pub params: Vec<Tensor<T>>,
    slots: Vec<Option<usize>>,
}

/// Per-layer inputs kept by the forward pass for backpropagation.
pub(crate) struct Cache<T> {
    inputs: Vec<(Vec<usize>, Vec<T>)>,
    pool_idx: Vec<Option<Vec<usize>>>,
}

fn param_shapes(spec: &ModelSpec, input: &[usize]) -> Result<Vec<Vec<usize>>> {
    let shapes = spec.shapes(input)?;
    let mut out = Vec::new();
    for (layer, s) in spec.layers.iter().zip(&shapes) {
        match *layer {
            LayerSpec::Dense { out: o } => {
                out.push(vec![o, s[0]]);
                out.push(vec![o]);
            }
            LayerSpec::Conv2d { out_ch, kh, kw, .. } => {
                out.push(vec![out_ch, s[0], kh, kw]);
                out.push(vec![out_ch]);
            }
            LayerSpec::Conv1d { out_ch, k, .. } => {
                out.push(vec![out_ch, s[0], k]);
                out.push(vec![out_ch]);
            }
            _ => {}
        }
    }
    Ok(out)
}

fn slots(spec: &ModelSpec) -> Vec<Option<usize>> {
    let mut next = 0;
    spec.layers
        .iter()
        .map(|l| {
            l.has_params().then(|| {
                next += 2;
                next - 2
            })
        })
        .collect()
}

impl<T> Cache<T>
where
    T: Real,
{
    /// Which relu inputs were positive and which elements each max pool
    /// selected; equal patterns mean the same piecewise-linear region.
    pub(crate) fn pattern(&self, spec: &ModelSpec) -> Vec<usize> {
        let mut out = Vec::new();
        for (li, layer) in spec.layers.iter().enumerate() {
            match layer {
                LayerSpec::Relu => out.extend(self.inputs[li].1.iter().map(|&v| (v > T::zero()) as usize)),
                LayerSpec::Maxpool2d { .. } => out.extend(self.pool_idx[li].iter().flatten()),
                _ => {}
            }
        }
        out
    }
}

impl<T: Real> Network<T> {
    /// Build with Kaiming-uniform weights (`±sqrt(6 / fan_in)`) and zero
    /// biases, drawn from `spec.seed`.
    pub fn new(spec: ModelSpec, input_shape: &[usize]) -> Result<Self> {
        let shapes = param_shapes(&spec, input_shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, shape)| {
                if i % 2 == 1 {
                    return Tensor::zeros(shape);
                }
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| T::from_f64c(rng.random_range(-bound..bound)))
                    .collect();
                Tensor { shape: shape.clone(), data }
            })
            .collect();
        Ok(Network {
            slots: slots(&spec),
            spec,
            input_shape: input_shape.to_vec(),
            params,
        })
    }

    /// Rebuild from stored parameters, checking every shape.
    pub fn from_params(spec: ModelSpec, input_shape: &[usize], params: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = param_shapes(&spec, input_shape)?;
        if shapes.len() != params.len() {
            return Err(NnError::Spec(format!("expected {} parameter tensors, got {}", shapes.len(), params.len())));
        }
        for (i, (s, p)) in shapes.iter().zip(&params).enumerate() {
            if *s != p.shape || p.data.len() != s.iter().product::<usize>() {
                return Err(NnError::Spec(format!("parameter {i} has shape {:?}, expected {s:?}", p.shape)));
            }
        }
        Ok(Network {
            slots: slots(&spec),
            spec,
            input_shape: input_shape.to_vec(),
            params,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes().expect("validated at build")
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            input_shape: self.input_shape.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            slots: self.slots.clone(),
        }
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let ok = x.shape.len() == self.input_shape.len()
            && x.shape.first() == self.input_shape.first()
            && (!self.spec.layers.iter().any(|l| matches!(l, LayerSpec::Flatten)) || x.shape == self.input_shape);
        if !ok {
            return Err(NnError::Shape(format!(
                "input shape {:?} incompatible with model input {:?}",
                x.shape, self.input_shape
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: &Tensor<T>) -> Result<(Vec<T>, Cache<T>)> {
        self.check_input(x)?;
        let mut shape = x.shape.clone();
        let mut cur = x.data.clone();
        let mut cache = Cache {
            inputs: Vec::with_capacity(self.spec.layers.len()),
            pool_idx: Vec::with_capacity(self.spec.layers.len()),
        };
        for (li, layer) in self.spec.layers.iter().enumerate() {
            let out_shape = layer.output_shape(&shape).map_err(|e| NnError::Shape(format!("layer {li}: {e}")))?;
            let mut pool = None;
            let next = match *layer {
                LayerSpec::Conv2d { out_ch, kh, kw, stride, pad } => {
                    let g = ConvGeom::new(shape[0], shape[1], shape[2], out_ch, kh, kw, stride, stride, pad, pad)?;
                    let (w, b) = self.layer_params(li);
                    ops::conv_sample(&cur, &w.data, &b.data, &g)
                }
                LayerSpec::Conv1d { out_ch, k, stride, pad } => {
                    let g = ConvGeom::new(shape[0], 1, shape[1], out_ch, 1, k, 1, stride, 0, pad)?;
                    let (w, b) = self.layer_params(li);
                    ops::conv_sample(&cur, &w.data, &b.data, &g)
                }
                LayerSpec::Maxpool2d { kh, kw, stride } => {
                    let g = pool_geom(&shape, kh, kw, stride)?;
                    let (o, idx) = ops::maxpool_sample(&cur, &g);
                    pool = Some(idx);
                    o
                }
                LayerSpec::GlobalAvgPool => ops::gap_sample(&cur, shape[0]),
                LayerSpec::Relu => ops::relu_sample(&cur),
                LayerSpec::Flatten | LayerSpec::SoftmaxOutput { .. } => cur.clone(),
                LayerSpec::Dense { .. } => {
                    let (w, b) = self.layer_params(li);
                    if w.shape[1] != cur.len() {
                        return Err(NnError::Shape(format!(
                            "layer {li}: dense expects {} inputs, got {}",
                            w.shape[1],
                            cur.len()
                        )));
                    }
                    ops::dense_sample(&cur, &w.data, &b.data)
                }
            };
            cache.inputs.push((shape, cur));
            cache.pool_idx.push(pool);
            shape = out_shape;
            cur = next;
        }
        Ok((cur, cache))
    }

    /// Backpropagate `dlogits` through the cached forward pass, adding
    /// parameter gradients into `grads`.
    pub(crate) fn backward(&self, cache: &Cache<T>, dlogits: Vec<T>, grads: &mut [Tensor<T>]) -> Result<()> {
        let mut d = dlogits;
        for li in (0..self.spec.layers.len()).rev() {
            let (shape, x) = &cache.inputs[li];
            // the first layer never needs an input gradient
            let need_dx = li > 0;
            d = match self.spec.layers[li] {
                LayerSpec::Conv2d { out_ch, kh, kw, stride, pad } => {
                    let g = ConvGeom::new(shape[0], shape[1], shape[2], out_ch, kh, kw, stride, stride, pad, pad)?;
                    self.conv_back(li, x, &d, &g, grads, need_dx)
                }
                LayerSpec::Conv1d { out_ch, k, stride, pad } => {
                    let g = ConvGeom::new(shape[0], 1, shape[1], out_ch, 1, k, 1, stride, 0, pad)?;
                    self.conv_back(li, x, &d, &g, grads, need_dx)
                }
                LayerSpec::Maxpool2d { .. } => {
                    let idx = cache.pool_idx[li].as_ref().expect("pool indices cached");
                    ops::maxpool_backward_sample(idx, &d, x.len())
                }
                LayerSpec::GlobalAvgPool => ops::gap_backward_sample(&d, x.len()),
                LayerSpec::Relu => ops::relu_backward_sample(x, &d),
                LayerSpec::Flatten | LayerSpec::SoftmaxOutput { .. } => d,
                LayerSpec::Dense { .. } => {
                    let s = self.slots[li].expect("dense has params");
                    let (gw, rest) = grads[s..].split_at_mut(1);
                    ops::dense_backward_sample(x, &self.params[s].data, &d, &mut gw[0].data, &mut rest[0].data, need_dx)
                        .unwrap_or_default()
                }
            };
        }
        Ok(())
    }

    fn conv_back(&self, li: usize, x: &[T], d: &[T], g: &ConvGeom, grads: &mut [Tensor<T>], need_dx: bool) -> Vec<T> {
        let s = self.slots[li].expect("conv has params");
        let (gw, rest) = grads[s..].split_at_mut(1);
        ops::conv_backward_sample(x, &self.params[s].data, d, g, &mut gw[0].data, &mut rest[0].data, need_dx)
            .unwrap_or_default()
    }

    fn layer_params(&self, li: usize) -> (&Tensor<T>, &Tensor<T>) {
        let s = self.slots[li].expect("layer has params");
        (&self.params[s], &self.params[s + 1])
    }

    /// Raw output scores for one sample.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Class probabilities for one sample.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<f64>> {
        Ok(ops::softmax(&self.logits(x)?))
    }

    /// Loss on one sample.
    pub fn loss(&self, x: &Tensor<T>, label: usize) -> Result<f64> {
        Ok(ops::softmax_cross_entropy(&self.logits(x)?, label)?.0)
    }

    /// Loss, whether the argmax is correct, and parameter gradients for one sample.
    pub fn sample_gradient(&self, x: &Tensor<T>, label: usize) -> Result<(f64, bool, Vec<Tensor<T>>)> {
        let (logits, cache) = self.forward_cached(x)?;
        let (loss, dlogits) = ops::softmax_cross_entropy(&logits, label)?;
        let correct = argmax(&logits) == label;
        let mut grads = self.zero_grads();
        self.backward(&cache, dlogits, &mut grads)?;
        Ok((loss, correct, grads))
    }
}

fn pool_geom(shape: &[usize], kh: usize, kw: usize, stride: usize) -> Result<PoolGeom> {
    match *shape {
        [c, h, w] => PoolGeom::new(c, h, w, kh, kw, stride),
        [c, l] => PoolGeom::new(c, 1, l, 1, kw, stride),
        _ => Err(NnError::Shape(format!("cannot pool shape {shape:?}"))),
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
