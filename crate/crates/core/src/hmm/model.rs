use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, HmmError, Result};
use crate::features::FeatureMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Ergodic,
    LeftToRight,
}

/// HMM with one diagonal Gaussian per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHmm {
    pub n_states: usize,
    pub dims: usize,
    pub topology: Topology,
    pub initial: Vec<f64>,
    /// Row-major `n_states × n_states`.
    pub transition: Vec<f64>,
    /// `n_states × dims`.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// HMM with a diagonal Gaussian mixture per state. Component arrays are laid
/// out `n_states × n_components (× dims)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmHmm {
    pub n_states: usize,
    pub n_components: usize,
    pub dims: usize,
    pub topology: Topology,
    pub initial: Vec<f64>,
    pub transition: Vec<f64>,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HmmModel {
    Gaussian(GaussianHmm),
    Gmm(GmmHmm),
}

/// Anything the forward algorithm can score.
pub trait SequenceModel {
    fn n_states(&self) -> usize;
    fn dims(&self) -> usize;
    fn initial(&self) -> &[f64];
    fn transition(&self) -> &[f64];
    /// `log b_j(x)` for one frame, written into `out` (length `n_states`).
    fn log_emission(&self, x: &[f64], out: &mut [f64]);
}

fn check_stochastic(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(HmmError::Invalid(format!("{name} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(HmmError::Invalid(format!("{name} sums to {s}")));
    }
    Ok(())
}

fn check_chain(n: usize, initial: &[f64], transition: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(HmmError::Invalid("need at least one state".into()));
    }
    if initial.len() != n || transition.len() != n * n {
        return Err(HmmError::Invalid("initial/transition sizes do not match n_states".into()));
    }
    check_stochastic("initial distribution", initial)?;
    for (i, row) in transition.chunks(n).enumerate() {
        check_stochastic(&format!("transition row {i}"), row)?;
    }
    Ok(())
}

fn check_variances(v: &[f64], floor: f64) -> Result<()> {
    match v.iter().position(|&x| !(x >= floor) || !x.is_finite()) {
        Some(i) => Err(HmmError::Invalid(format!("variance {} at index {i} below floor {floor}", v[i]))),
        None => Ok(()),
    }
}

/// `-0.5 Σ ln(2π σ²)` for a diagonal Gaussian.
pub(crate) fn log_norm_const(var: &[f64]) -> f64 {
    -0.5 * var.iter().map(|v| LN_2PI + v.ln()).sum::<f64>()
}

pub(crate) fn log_gauss(x: &[f64], mean: &[f64], var: &[f64], norm: f64) -> f64 {
    let mut q = 0.0;
    for ((&xi, &m), &v) in x.iter().zip(mean).zip(var) {
        let d = xi - m;
        q += d * d / v;
    }
    norm - 0.5 * q
}

impl GaussianHmm {
    pub fn new(
        initial: Vec<f64>,
        transition: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
        dims: usize,
    ) -> Result<Self> {
        let n_states = initial.len();
        let m = GaussianHmm {
            n_states,
            dims,
            topology: Topology::Ergodic,
            initial,
            transition,
            means,
            variances,
        };
        m.validate(0.0)?;
        Ok(m)
    }

    pub fn validate(&self, var_floor: f64) -> Result<()> {
        check_chain(self.n_states, &self.initial, &self.transition)?;
        let n = self.n_states * self.dims;
        if self.dims == 0 || self.means.len() != n || self.variances.len() != n {
            return Err(HmmError::Invalid("means/variances must be n_states × dims".into()));
        }
        check_variances(&self.variances, var_floor.max(f64::MIN_POSITIVE))
    }

    pub fn mean(&self, state: usize) -> &[f64] {
        &self.means[state * self.dims..(state + 1) * self.dims]
    }

    pub fn variance(&self, state: usize) -> &[f64] {
        &self.variances[state * self.dims..(state + 1) * self.dims]
    }

    /// The same model expressed as a one-component mixture.
    pub fn to_gmm(&self) -> GmmHmm {
        GmmHmm {
            n_states: self.n_states,
            n_components: 1,
            dims: self.dims,
            topology: self.topology,
            initial: self.initial.clone(),
            transition: self.transition.clone(),
            weights: vec![1.0; self.n_states],
            means: self.means.clone(),
            variances: self.variances.clone(),
        }
    }

    /// Draw a state path and observation sequence of `frames` frames.
    pub fn sample<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
        self.to_gmm().sample(frames, rng)
    }
}

impl GmmHmm {
    pub fn validate(&self, var_floor: f64) -> Result<()> {
        check_chain(self.n_states, &self.initial, &self.transition)?;
        let (n, m, d) = (self.n_states, self.n_components, self.dims);
        if m == 0 || d == 0 || self.weights.len() != n * m || self.means.len() != n * m * d || self.variances.len() != n * m * d {
            return Err(HmmError::Invalid("mixture arrays do not match n_states × n_components × dims".into()));
        }
        for (j, w) in self.weights.chunks(m).enumerate() {
            check_stochastic(&format!("mixture weights of state {j}"), w)?;
        }
        check_variances(&self.variances, var_floor.max(f64::MIN_POSITIVE))
    }

    fn component(&self, j: usize, m: usize) -> std::ops::Range<usize> {
        let k = (j * self.n_components + m) * self.dims;
        k..k + self.dims
    }

    pub fn sample<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
        let draw = |p: &[f64], rng: &mut R| -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &v) in p.iter().enumerate() {
                acc += v;
                if u < acc {
                    return i;
                }
            }
            p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
        };
        let n = self.n_states;
        let mut states = Vec::with_capacity(frames);
        let mut data = Vec::with_capacity(frames * self.dims);
        let mut s = draw(&self.initial, rng);
        for t in 0..frames {
            if t > 0 {
                s = draw(&self.transition[s * n..(s + 1) * n], rng);
            }
            states.push(s);
            let m = draw(&self.weights[s * self.n_components..(s + 1) * self.n_components], rng);
            let r = self.component(s, m);
            for (&mu, &var) in self.means[r.clone()].iter().zip(&self.variances[r]) {
                let z: f64 = StandardNormal.sample(rng);
                data.push(mu + var.sqrt() * z);
            }
        }
        (states, data)
    }

    /// Per-component `ln w + ln N(x)` for every state, into `out`
    /// (`n_states × n_components`), using precomputed normalizers.
    pub(crate) fn log_components(&self, x: &[f64], norms: &[f64], out: &mut [f64]) {
        for j in 0..self.n_states {
            for m in 0..self.n_components {
                let k = j * self.n_components + m;
                let r = self.component(j, m);
                out[k] = self.weights[k].ln() + log_gauss(x, &self.means[r.clone()], &self.variances[r], norms[k]);
            }
        }
    }

    pub(crate) fn norms(&self) -> Vec<f64> {
        self.variances.chunks(self.dims).map(log_norm_const).collect()
    }
}

impl SequenceModel for GaussianHmm {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn dims(&self) -> usize {
        self.dims
    }
    fn initial(&self) -> &[f64] {
        &self.initial
    }
    fn transition(&self) -> &[f64] {
        &self.transition
    }
    fn log_emission(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let var = self.variance(j);
            *o = log_gauss(x, self.mean(j), var, log_norm_const(var));
        }
    }
}

impl SequenceModel for GmmHmm {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn dims(&self) -> usize {
        self.dims
    }
    fn initial(&self) -> &[f64] {
        &self.initial
    }
    fn transition(&self) -> &[f64] {
        &self.transition
    }
    fn log_emission(&self, x: &[f64], out: &mut [f64]) {
        let norms = self.norms();
        let mut comp = vec![0.0; self.n_states * self.n_components];
        self.log_components(x, &norms, &mut comp);
        for (o, c) in out.iter_mut().zip(comp.chunks(self.n_components)) {
            *o = log_sum_exp(c);
        }
    }
}

impl HmmModel {
    fn inner(&self) -> &dyn SequenceModel {
        match self {
            HmmModel::Gaussian(m) => m,
            HmmModel::Gmm(m) => m,
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            HmmModel::Gaussian(_) => 1,
            HmmModel::Gmm(m) => m.n_components,
        }
    }

    pub fn validate(&self, var_floor: f64) -> Result<()> {
        match self {
            HmmModel::Gaussian(m) => m.validate(var_floor),
            HmmModel::Gmm(m) => m.validate(var_floor),
        }
    }
}

impl SequenceModel for HmmModel {
    fn n_states(&self) -> usize {
        self.inner().n_states()
    }
    fn dims(&self) -> usize {
        self.inner().dims()
    }
    fn initial(&self) -> &[f64] {
        self.inner().initial()
    }
    fn transition(&self) -> &[f64] {
        self.inner().transition()
    }
    fn log_emission(&self, x: &[f64], out: &mut [f64]) {
        self.inner().log_emission(x, out)
    }
}

/// `log p(obs | model)` by the forward algorithm in log space.
pub fn forward_loglik<M: SequenceModel + ?Sized>(model: &M, obs: &FeatureMatrix) -> Result<f64> {
    if obs.dims != model.dims() {
        return Err(HmmError::Dims {
            expected: model.dims(),
            got: obs.dims,
        });
    }
    let n = model.n_states();
    let log_a: Vec<f64> = model.transition().iter().map(|p| p.ln()).collect();
    let mut b = vec![0.0; n];
    let mut alpha: Vec<f64> = Vec::with_capacity(n);
    let mut next = vec![0.0; n];
    let mut terms = vec![0.0; n];
    for (t, x) in obs.rows().enumerate() {
        model.log_emission(x, &mut b);
        if t == 0 {
            alpha.extend(model.initial().iter().zip(&b).map(|(p, bj)| p.ln() + bj));
            continue;
        }
        for j in 0..n {
            for i in 0..n {
                terms[i] = alpha[i] + log_a[i * n + j];
            }
            next[j] = log_sum_exp(&terms) + b[j];
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    Ok(log_sum_exp(&alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FrameConfig};
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn matrix(frames: usize, dims: usize, data: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(FeatureKind::Stacked, FrameConfig::mfcc_default(), frames, dims, data).unwrap()
    }

    fn brute_force(m: &GaussianHmm, obs: &FeatureMatrix) -> f64 {
        let n = m.n_states;
        let t_len = obs.frames;
        let mut paths = Vec::new();
        for code in 0..n.pow(t_len as u32) {
            let mut c = code;
            let path: Vec<usize> = (0..t_len)
                .map(|_| {
                    let s = c % n;
                    c /= n;
                    s
                })
                .collect();
            let mut lp = m.initial[path[0]].ln();
            for t in 0..t_len {
                if t > 0 {
                    lp += m.transition[path[t - 1] * n + path[t]].ln();
                }
                let s = path[t];
                // independent scalar Gaussian product
                for d in 0..m.dims {
                    let v = m.variance(s)[d];
                    let z = obs.get(t, d) - m.mean(s)[d];
                    lp += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - z * z / (2.0 * v);
                }
            }
            paths.push(lp);
        }
        log_sum_exp(&paths)
    }

    fn stochastic(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    fn random_model(n: usize, d: usize, rng: &mut ChaCha8Rng) -> GaussianHmm {
        let initial = stochastic(&(0..n).map(|_| rng.random_range(0.05..1.0)).collect::<Vec<_>>());
        let transition = (0..n)
            .flat_map(|_| stochastic(&(0..n).map(|_| rng.random_range(0.05..1.0)).collect::<Vec<_>>()))
            .collect();
        let means = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let variances = (0..n * d).map(|_| rng.random_range(0.2..3.0)).collect();
        GaussianHmm::new(initial, transition, means, variances, d).unwrap()
    }

    #[test]
    fn single_state_is_iid_gaussian() {
        let m = GaussianHmm::new(vec![1.0], vec![1.0], vec![0.5, -1.0], vec![2.0, 0.5], 2).unwrap();
        let obs = matrix(3, 2, vec![0.0, 0.0, 1.0, -1.0, 2.0, 3.0]);
        let expected: f64 = obs
            .rows()
            .map(|x| {
                (0..2)
                    .map(|d| {
                        let v = m.variances[d];
                        -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x[d] - m.means[d]).powi(2) / (2.0 * v)
                    })
                    .sum::<f64>()
            })
            .sum();
        assert!((forward_loglik(&m, &obs).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn two_states_three_frames_match_eight_paths() {
        let m = GaussianHmm::new(
            vec![0.6, 0.4],
            vec![0.7, 0.3, 0.2, 0.8],
            vec![0.0, 3.0],
            vec![1.0, 0.5],
            1,
        )
        .unwrap();
        let obs = matrix(3, 1, vec![0.1, 2.5, 3.2]);
        assert!((forward_loglik(&m, &obs).unwrap() - brute_force(&m, &obs)).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn forward_matches_path_enumeration(n in 1usize..=3, t in 1usize..=6, d in 1usize..=3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(n, d, &mut rng);
            let obs = matrix(t, d, (0..t * d).map(|_| rng.random_range(-4.0..4.0)).collect());
            let f = forward_loglik(&m, &obs).unwrap();
            prop_assert!((f - brute_force(&m, &obs)).abs() <= 1e-8);
        }

        #[test]
        fn duplicated_states_leave_loglik_unchanged(n in 1usize..=3, t in 1usize..=20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 2;
            let m = random_model(n, d, &mut rng);
            // state i becomes states 2i and 2i+1, splitting initial mass and
            // every incoming transition in the ratio q : 1-q
            let q = rng.random_range(0.1..0.9);
            let n2 = 2 * n;
            let split = |p: f64, k: usize| if k % 2 == 0 { p * q } else { p * (1.0 - q) };
            let initial = (0..n2).map(|k| split(m.initial[k / 2], k)).collect();
            let mut transition = vec![0.0; n2 * n2];
            for a in 0..n2 {
                for b in 0..n2 {
                    transition[a * n2 + b] = split(m.transition[(a / 2) * n + b / 2], b);
                }
            }
            let dup = |v: &[f64]| (0..n2).flat_map(|k| v[(k / 2) * d..(k / 2 + 1) * d].to_vec()).collect::<Vec<_>>();
            let m2 = GaussianHmm::new(initial, transition, dup(&m.means), dup(&m.variances), d).unwrap();
            let obs = matrix(t, d, (0..t * d).map(|_| rng.random_range(-3.0..3.0)).collect());
            let a = forward_loglik(&m, &obs).unwrap();
            let b = forward_loglik(&m2, &obs).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }

        #[test]
        fn one_component_gmm_matches_gaussian(n in 1usize..=4, t in 1usize..=30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(n, 3, &mut rng);
            let obs = matrix(t, 3, (0..t * 3).map(|_| rng.random_range(-3.0..3.0)).collect());
            let a = forward_loglik(&m, &obs).unwrap();
            let b = forward_loglik(&m.to_gmm(), &obs).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = GaussianHmm::new(vec![1.0], vec![1.0], vec![0.0], vec![1.0], 1).unwrap();
        assert!(matches!(
            forward_loglik(&m, &matrix(2, 2, vec![0.0; 4])),
            Err(HmmError::Dims { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn extreme_observations_stay_finite() {
        let m = GaussianHmm::new(vec![0.5, 0.5], vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 1.0], vec![1e-3, 1e-3], 1).unwrap();
        let obs = matrix(4, 1, vec![1e6, -1e6, 0.0, 1e3]);
        assert!(forward_loglik(&m, &obs).unwrap().is_finite());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(GaussianHmm::new(vec![0.5, 0.4], vec![0.5; 4], vec![0.0; 2], vec![1.0; 2], 1).is_err());
        assert!(GaussianHmm::new(vec![1.0], vec![1.0], vec![0.0], vec![0.0], 1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = HmmModel::Gaussian(random_model(3, 2, &mut rng));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"gaussian\""));
        assert_eq!(serde_json::from_str::<HmmModel>(&s).unwrap(), m);
    }
}
