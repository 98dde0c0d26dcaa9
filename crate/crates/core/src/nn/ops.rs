//! Layer primitives with hand-derived gradients. The `*_sample` functions
//! work on one sample (no batch axis); the public functions take `[N, ...]`
//! batches and loop over samples.

use super::tensor::{gemm, Mat, Real, Tensor};
use super::{NnError, Result};

/// Resolved 2D convolution geometry for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    #[allow(clippy::too_many_arguments)]
    pub fn new(c: usize, h: usize, w: usize, o: usize, kh: usize, kw: usize, sh: usize, sw: usize, ph: usize, pw: usize) -> Result<Self> {
        if kh == 0 || kw == 0 || sh == 0 || sw == 0 || o == 0 || c == 0 {
            return Err(NnError::Shape("kernel, stride and channel counts must be positive".into()));
        }
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(NnError::Shape(format!(
                "{kh}×{kw} kernel does not fit a {h}×{w} input padded by {ph}×{pw}"
            )));
        }
        Ok(ConvGeom {
            c, h, w, o, kh, kw, sh, sw, ph, pw,
            ho: (h + 2 * ph - kh) / sh + 1,
            wo: (w + 2 * pw - kw) / sw + 1,
        })
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfold padded receptive fields into a `(C·kh·kw) × (Ho·Wo)` matrix.
fn im2col<T: Real>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let p = g.positions();
    let mut cols = vec![T::zero(); g.patch() * p];
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * p..][..p];
                for oy in 0..g.ho {
                    let y = (oy * g.sh + i) as isize - g.ph as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let src = &plane[y as usize * g.w..(y as usize + 1) * g.w];
                    let dst = &mut row[oy * g.wo..(oy + 1) * g.wo];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let xx = (ox * g.sw + j) as isize - g.pw as isize;
                        if xx >= 0 && xx < g.w as isize {
                            *d = src[xx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], g: &ConvGeom) -> Vec<T> {
    let p = g.positions();
    let mut x = vec![T::zero(); g.c * g.h * g.w];
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &cols[((c * g.kh + i) * g.kw + j) * p..][..p];
                for oy in 0..g.ho {
                    let y = (oy * g.sh + i) as isize - g.ph as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for (ox, &v) in row[oy * g.wo..(oy + 1) * g.wo].iter().enumerate() {
                        let xx = (ox * g.sw + j) as isize - g.pw as isize;
                        if xx >= 0 && xx < g.w as isize {
                            dst[xx as usize] += v;
                        }
                    }
                }
            }
        }
    }
    x
}

/// Cross-correlation of one `[C, H, W]` sample; returns `[O, Ho, Wo]` data.
pub(crate) fn conv_sample<T: Real>(x: &[T], weight: &[T], bias: &[T], g: &ConvGeom) -> Vec<T> {
    let cols = im2col(x, g);
    let p = g.positions();
    let mut out = vec![T::zero(); g.o * p];
    for (o, row) in out.chunks_mut(p).enumerate() {
        row.iter_mut().for_each(|v| *v = bias[o]);
    }
    gemm(Mat::new(weight, g.o, g.patch()), Mat::new(&cols, g.patch(), p), T::one(), &mut out);
    out
}

/// Accumulates kernel and bias gradients; returns the input gradient when
/// `need_dx` is set.
pub(crate) fn conv_backward_sample<T: Real>(
    x: &[T],
    weight: &[T],
    dout: &[T],
    g: &ConvGeom,
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    let cols = im2col(x, g);
    let p = g.positions();
    gemm(Mat::new(dout, g.o, p), Mat::new(&cols, g.patch(), p).t(), T::one(), dweight);
    for (db, row) in dbias.iter_mut().zip(dout.chunks(p)) {
        *db += row.iter().copied().sum::<T>();
    }
    if !need_dx {
        return None;
    }
    let mut dcols = vec![T::zero(); g.patch() * p];
    gemm(Mat::new(weight, g.o, g.patch()).t(), Mat::new(dout, g.o, p), T::zero(), &mut dcols);
    Some(col2im(&dcols, g))
}

/// Pooling window geometry. Windows are clipped at the border, and an input
/// smaller than the kernel pools to a single output cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub ho: usize,
    pub wo: usize,
}

impl PoolGeom {
    pub fn new(c: usize, h: usize, w: usize, kh: usize, kw: usize, stride: usize) -> Result<Self> {
        if kh == 0 || kw == 0 || stride == 0 {
            return Err(NnError::Shape("pool kernel and stride must be positive".into()));
        }
        let out = |n: usize, k: usize| if n < k { 1 } else { (n - k) / stride + 1 };
        Ok(PoolGeom { c, h, w, kh, kw, stride, ho: out(h, kh), wo: out(w, kw) })
    }
}

/// Max over each window; also returns the flat input index chosen per output.
pub(crate) fn maxpool_sample<T: Real>(x: &[T], g: &PoolGeom) -> (Vec<T>, Vec<usize>) {
    let n = g.c * g.ho * g.wo;
    let mut out = Vec::with_capacity(n);
    let mut idx = Vec::with_capacity(n);
    for c in 0..g.c {
        let base = c * g.h * g.w;
        for oy in 0..g.ho {
            let y0 = oy * g.stride;
            let y1 = (y0 + g.kh).min(g.h);
            for ox in 0..g.wo {
                let x0 = ox * g.stride;
                let x1 = (x0 + g.kw).min(g.w);
                let mut best = base + y0 * g.w + x0;
                for y in y0..y1 {
                    for xx in x0..x1 {
                        let k = base + y * g.w + xx;
                        if x[k] > x[best] {
                            best = k;
                        }
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

pub(crate) fn maxpool_backward_sample<T: Real>(idx: &[usize], dout: &[T], in_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); in_len];
    for (&i, &d) in idx.iter().zip(dout) {
        dx[i] += d;
    }
    dx
}

/// Mean over `spatial` trailing elements for each of `c` channels.
pub(crate) fn gap_sample<T: Real>(x: &[T], c: usize) -> Vec<T> {
    let s = x.len() / c;
    let inv = T::from_f64c(1.0 / s as f64);
    x.chunks(s).map(|ch| ch.iter().copied().sum::<T>() * inv).collect()
}

pub(crate) fn gap_backward_sample<T: Real>(dout: &[T], in_len: usize) -> Vec<T> {
    let s = in_len / dout.len();
    let inv = T::from_f64c(1.0 / s as f64);
    dout.iter().flat_map(|&d| std::iter::repeat_n(d * inv, s)).collect()
}

/// `W x + b` with `W` stored `[out, in]`.
pub(crate) fn dense_sample<T: Real>(x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let mut y = bias.to_vec();
    gemm(Mat::new(weight, bias.len(), x.len()), Mat::new(x, x.len(), 1), T::one(), &mut y);
    y
}

pub(crate) fn dense_backward_sample<T: Real>(
    x: &[T],
    weight: &[T],
    dy: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Vec<T>> {
    gemm(Mat::new(dy, dy.len(), 1), Mat::new(x, 1, x.len()), T::one(), dweight);
    for (b, &d) in dbias.iter_mut().zip(dy) {
        *b += d;
    }
    if !need_dx {
        return None;
    }
    let mut dx = vec![T::zero(); x.len()];
    gemm(Mat::new(weight, dy.len(), x.len()).t(), Mat::new(dy, dy.len(), 1), T::zero(), &mut dx);
    Some(dx)
}

pub(crate) fn relu_sample<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

pub(crate) fn relu_backward_sample<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter().zip(dy).map(|(&v, &d)| if v > T::zero() { d } else { T::zero() }).collect()
}

/// Numerically stable softmax, computed in f64.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let z: Vec<f64> = logits.iter().map(|v| v.to_f64c()).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], label: usize) -> Result<(f64, Vec<T>)> {
    if label >= logits.len() {
        return Err(NnError::Label { label, n_classes: logits.len() });
    }
    let z: Vec<f64> = logits.iter().map(|v| v.to_f64c()).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let loss = lse - z[label];
    let grad = z
        .iter()
        .enumerate()
        .map(|(i, v)| T::from_f64c((v - lse).exp() - if i == label { 1.0 } else { 0.0 }))
        .collect();
    Ok((loss, grad))
}

fn expect_rank<T>(t: &Tensor<T>, rank: usize, what: &str) -> Result<()> {
    if t.shape.len() != rank {
        return Err(NnError::Shape(format!("{what} must have rank {rank}, got shape {:?}", t.shape)));
    }
    Ok(())
}

/// Input, kernel and bias gradients of a convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dkernels: Tensor<T>,
    pub dbias: Tensor<T>,
}

fn conv2d_geom<T>(x: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>, stride: (usize, usize), pad: (usize, usize)) -> Result<ConvGeom> {
    expect_rank(x, 4, "conv2d input")?;
    expect_rank(kernels, 4, "conv2d kernels")?;
    let (c, h, w) = (x.shape[1], x.shape[2], x.shape[3]);
    let (o, kc, kh, kw) = (kernels.shape[0], kernels.shape[1], kernels.shape[2], kernels.shape[3]);
    if kc != c {
        return Err(NnError::Shape(format!("kernels expect {kc} channels, input has {c}")));
    }
    if bias.shape != [o] {
        return Err(NnError::Shape(format!("bias shape {:?} does not match {o} output channels", bias.shape)));
    }
    ConvGeom::new(c, h, w, o, kh, kw, stride.0, stride.1, pad.0, pad.1)
}

/// 2D cross-correlation of `[N, C, H, W]` with `[O, C, kh, kw]` kernels.
pub fn conv2d_forward<T: Real>(x: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let g = conv2d_geom(x, kernels, bias, (stride, stride), (pad, pad))?;
    let n = x.shape[0];
    let per = g.c * g.h * g.w;
    let mut data = Vec::with_capacity(n * g.o * g.ho * g.wo);
    for i in 0..n {
        data.extend(conv_sample(&x.data[i * per..(i + 1) * per], &kernels.data, &bias.data, &g));
    }
    Tensor::new(vec![n, g.o, g.ho, g.wo], data)
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
    dout: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = conv2d_geom(x, kernels, bias, (stride, stride), (pad, pad))?;
    let n = x.shape[0];
    if dout.shape != [n, g.o, g.ho, g.wo] {
        return Err(NnError::Shape(format!("output gradient shape {:?} does not match forward output", dout.shape)));
    }
    let (per_in, per_out) = (g.c * g.h * g.w, g.o * g.ho * g.wo);
    let mut dk = Tensor::zeros(&kernels.shape);
    let mut db = Tensor::zeros(&bias.shape);
    let mut dx = Vec::with_capacity(x.len());
    for i in 0..n {
        let d = conv_backward_sample(
            &x.data[i * per_in..(i + 1) * per_in],
            &kernels.data,
            &dout.data[i * per_out..(i + 1) * per_out],
            &g,
            &mut dk.data,
            &mut db.data,
            true,
        );
        dx.extend(d.expect("input gradient requested"));
    }
    Ok(ConvGrads { dx: Tensor::new(x.shape.clone(), dx)?, dkernels: dk, dbias: db })
}

fn as_2d<T: Real>(t: &Tensor<T>, what: &str) -> Result<Tensor<T>> {
    expect_rank(t, 3, what)?;
    let s = &t.shape;
    t.clone().reshaped(vec![s[0], s[1], 1, s[2]])
}

/// 1D cross-correlation of `[N, C, L]` with `[O, C, k]` kernels.
pub fn conv1d_forward<T: Real>(x: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let x4 = as_2d(x, "conv1d input")?;
    let k4 = as_2d(kernels, "conv1d kernels")?;
    let g = conv2d_geom(&x4, &k4, bias, (1, stride), (0, pad))?;
    let n = x.shape[0];
    let per = g.c * g.w;
    let mut data = Vec::with_capacity(n * g.o * g.wo);
    for i in 0..n {
        data.extend(conv_sample(&x.data[i * per..(i + 1) * per], &kernels.data, &bias.data, &g));
    }
    Tensor::new(vec![n, g.o, g.wo], data)
}

pub fn conv1d_backward<T: Real>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
    dout: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let x4 = as_2d(x, "conv1d input")?;
    let k4 = as_2d(kernels, "conv1d kernels")?;
    let d4 = as_2d(dout, "conv1d output gradient")?;
    let g = conv2d_geom(&x4, &k4, bias, (1, stride), (0, pad))?;
    if d4.shape != [x.shape[0], g.o, 1, g.wo] {
        return Err(NnError::Shape(format!("output gradient shape {:?} does not match forward output", dout.shape)));
    }
    let (per_in, per_out) = (g.c * g.w, g.o * g.wo);
    let mut dk = Tensor::zeros(&kernels.shape);
    let mut db = Tensor::zeros(&bias.shape);
    let mut dx = Vec::with_capacity(x.len());
    for i in 0..x.shape[0] {
        let d = conv_backward_sample(
            &x.data[i * per_in..(i + 1) * per_in],
            &kernels.data,
            &dout.data[i * per_out..(i + 1) * per_out],
            &g,
            &mut dk.data,
            &mut db.data,
            true,
        );
        dx.extend(d.expect("input gradient requested"));
    }
    Ok(ConvGrads { dx: Tensor::new(x.shape.clone(), dx)?, dkernels: dk, dbias: db })
}

/// Max pooling over `[N, C, H, W]`. Returns the pooled tensor and, per
/// output cell, the flat index of the selected input element.
pub fn maxpool2d<T: Real>(x: &Tensor<T>, kh: usize, kw: usize, stride: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    expect_rank(x, 4, "maxpool2d input")?;
    let (n, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let g = PoolGeom::new(c, h, w, kh, kw, stride)?;
    let per = c * h * w;
    let mut data = Vec::new();
    let mut idx = Vec::new();
    for i in 0..n {
        let (o, ix) = maxpool_sample(&x.data[i * per..(i + 1) * per], &g);
        data.extend(o);
        idx.extend(ix.into_iter().map(|k| k + i * per));
    }
    Ok((Tensor::new(vec![n, c, g.ho, g.wo], data)?, idx))
}

pub fn maxpool2d_backward<T: Real>(input_shape: &[usize], indices: &[usize], dout: &Tensor<T>) -> Result<Tensor<T>> {
    if indices.len() != dout.len() {
        return Err(NnError::Shape("pool indices do not match output gradient".into()));
    }
    Tensor::new(input_shape.to_vec(), maxpool_backward_sample(indices, &dout.data, input_shape.iter().product()))
}

/// Per-channel mean over all trailing axes: `[N, C, ...] → [N, C]`.
pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.ndim() < 3 {
        return Err(NnError::Shape(format!("global_avg_pool needs [N, C, ...], got {:?}", x.shape)));
    }
    let (n, c) = (x.shape[0], x.shape[1]);
    let per = x.len() / n;
    let data = (0..n).flat_map(|i| gap_sample(&x.data[i * per..(i + 1) * per], c)).collect();
    Tensor::new(vec![n, c], data)
}

pub fn global_avg_pool_backward<T: Real>(input_shape: &[usize], dout: &Tensor<T>) -> Result<Tensor<T>> {
    let n = input_shape[0];
    let per: usize = input_shape[1..].iter().product();
    let c = input_shape[1];
    let data = (0..n).flat_map(|i| gap_backward_sample(&dout.data[i * c..(i + 1) * c], per)).collect();
    Tensor::new(input_shape.to_vec(), data)
}

/// `[N, in] → [N, out]` with weights `[out, in]`.
pub fn dense<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    expect_rank(x, 2, "dense input")?;
    expect_rank(weight, 2, "dense weight")?;
    let (n, d_in) = (x.shape[0], x.shape[1]);
    let d_out = weight.shape[0];
    if weight.shape[1] != d_in || bias.shape != [d_out] {
        return Err(NnError::Shape(format!(
            "dense weight {:?} / bias {:?} incompatible with input {:?}",
            weight.shape, bias.shape, x.shape
        )));
    }
    let mut y: Vec<T> = (0..n).flat_map(|_| bias.data.iter().copied()).collect();
    gemm(Mat::new(&x.data, n, d_in), Mat::new(&weight.data, d_out, d_in).t(), T::one(), &mut y);
    Tensor::new(vec![n, d_out], y)
}

/// Input, weight and bias gradients of [`dense`].
pub fn dense_backward<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, d_in) = (x.shape[0], x.shape[1]);
    let d_out = weight.shape[0];
    if dy.shape != [n, d_out] {
        return Err(NnError::Shape(format!("output gradient shape {:?} does not match [N, {d_out}]", dy.shape)));
    }
    let mut dx = vec![T::zero(); n * d_in];
    gemm(Mat::new(&dy.data, n, d_out), Mat::new(&weight.data, d_out, d_in), T::zero(), &mut dx);
    let mut dw = vec![T::zero(); d_out * d_in];
    gemm(Mat::new(&dy.data, n, d_out).t(), Mat::new(&x.data, n, d_in), T::zero(), &mut dw);
    let db = (0..d_out).map(|o| (0..n).map(|i| dy.data[i * d_out + o]).sum()).collect();
    Ok((Tensor::new(x.shape.clone(), dx)?, Tensor::new(weight.shape.clone(), dw)?, Tensor::new(vec![d_out], db)?))
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    Tensor { shape: x.shape.clone(), data: relu_sample(&x.data) }
}

pub fn relu_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    Tensor { shape: x.shape.clone(), data: relu_backward_sample(&x.data, &dy.data) }
}
