use super::network::Network;
use super::ops::softmax_cross_entropy;
use super::tensor::{Real, Tensor};
use super::Result;

/// Entries probed per parameter tensor.
const PROBES_PER_TENSOR: usize = 20;

/// Per-tensor comparison of analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(max |analytic|, max |numeric|)` per tensor.
    pub per_tensor: Vec<f64>,
    pub max_rel_error: f64,
    /// Probes discarded because the step crossed a relu or max-pool switch.
    pub skipped: usize,
}

/// Visit order for probe candidates: a fixed stride coprime with `len`, so
/// probes spread over the whole tensor.
fn candidates(len: usize) -> impl Iterator<Item = usize> {
    let mut stride = (len / PROBES_PER_TENSOR).max(1) | 1;
    while gcd(stride, len) != 1 {
        stride += 2;
    }
    (0..len).map(move |k| (k * stride) % len)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Compare backpropagated parameter gradients of the loss at `(x, label)`
/// against central differences with step `eps`. Up to 20 entries per tensor
/// are probed; a probe whose ±eps step changes any relu sign or max-pool
/// choice is skipped, since the loss is not differentiable across it.
pub fn grad_check<T: Real>(net: &Network<T>, x: &Tensor<T>, label: usize, eps: f64) -> Result<GradCheckReport> {
    let (_, _, analytic) = net.sample_gradient(x, label)?;
    let base = net.forward_cached(x)?.1.pattern(&net.spec);
    let mut probe = net.clone();
    let mut per_tensor = Vec::with_capacity(net.params.len());
    let mut skipped = 0;
    for (pi, grad) in analytic.iter().enumerate() {
        let mut max_diff: f64 = 0.0;
        let mut scale: f64 = f64::MIN_POSITIVE;
        let mut used = 0;
        for k in candidates(grad.len()) {
            if used == PROBES_PER_TENSOR {
                break;
            }
            let orig = net.params[pi].data[k];
            let plus = orig + T::from_f64c(eps);
            let minus = orig - T::from_f64c(eps);
            probe.params[pi].data[k] = plus;
            let (zp, cp) = probe.forward_cached(x)?;
            probe.params[pi].data[k] = minus;
            let (zm, cm) = probe.forward_cached(x)?;
            probe.params[pi].data[k] = orig;
            if cp.pattern(&net.spec) != base || cm.pattern(&net.spec) != base {
                skipped += 1;
                continue;
            }
            used += 1;
            let lp = softmax_cross_entropy(&zp, label)?.0;
            let lm = softmax_cross_entropy(&zm, label)?.0;
            let numeric = (lp - lm) / (plus - minus).to_f64c();
            let a = grad.data[k].to_f64c();
            max_diff = max_diff.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        per_tensor.push(max_diff / scale);
    }
    let max_rel_error = per_tensor.iter().cloned().fold(0.0, f64::max);
    Ok(GradCheckReport { per_tensor, max_rel_error, skipped })
}

/// Central-difference gradient of a scalar function, for testing layer
/// primitives.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(x: &[f64], eps: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let hi = f(&probe);
            probe[i] = x[i] - eps;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}
