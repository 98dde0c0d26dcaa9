use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{argmax, Network};
use super::ops::softmax_cross_entropy;
use super::optim::{Optimizer, OptimizerConfig};
use super::spec::ModelSpec;
use super::tensor::{Real, Tensor};
use super::{NnError, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::Config("epochs and batch_size must be ≥ 1".into()));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Snapshot with the highest validation accuracy; ties go to the lower
    /// validation loss, then to the earlier epoch.
    pub network: Network<T>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

pub type Example<T> = (Tensor<T>, usize);

/// Build `spec` for `input_shape` and train it.
pub fn train<T: Real>(
    spec: ModelSpec,
    input_shape: &[usize],
    train_set: &[Example<T>],
    val_set: &[Example<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let net = Network::new(spec, input_shape)?;
    fit(net, train_set, val_set, cfg)
}

/// Mini-batch training from an existing network. Each epoch shuffles with a
/// seed derived from `cfg.seed`; per-sample gradients are computed in
/// parallel and summed in batch order, so results do not depend on thread
/// count. With an empty validation set, training accuracy selects the snapshot.
pub fn fit<T: Real>(mut net: Network<T>, train_set: &[Example<T>], val_set: &[Example<T>], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::Config("empty training set".into()));
    }
    let n_classes = net.n_classes();
    if let Some((_, l)) = train_set.iter().chain(val_set).find(|(_, l)| *l >= n_classes) {
        return Err(NnError::Label { label: *l, n_classes });
    }
    let mut opt = Optimizer::new(cfg.optimizer, &net.params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, Network<T>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        // per-sample losses summed in dataset order, independent of shuffling
        let mut losses = vec![0.0; train_set.len()];
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = batch
                .par_iter()
                .map(|&i| net.sample_gradient(&train_set[i].0, train_set[i].1))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = net.zero_grads();
            for (&i, (loss, ok, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() {
                    return Err(NnError::NonFinite { epoch, batch: b + 1 });
                }
                losses[i] = *loss;
                correct += *ok as usize;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, &v) in acc.data.iter_mut().zip(&gi.data) {
                        *a += v;
                    }
                }
            }
            let scale = T::from_f64c(1.0 / batch.len() as f64);
            grads.iter_mut().flat_map(|g| g.data.iter_mut()).for_each(|v| *v *= scale);
            opt.step(&mut net.params, &grads);
            if !net.params.iter().all(|p| p.is_finite()) {
                return Err(NnError::NonFinite { epoch, batch: b + 1 });
            }
        }
        let train_acc = correct as f64 / train_set.len() as f64;
        let train_loss = losses.iter().sum::<f64>() / train_set.len() as f64;
        let (val_acc, val_loss) = if val_set.is_empty() {
            (train_acc, train_loss)
        } else {
            evaluate(&net, val_set)?
        };
        let stats = EpochStats {
            epoch,
            train_loss,
            train_acc,
            val_acc,
            val_loss,
        };
        info!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val acc {:.3}",
            stats.train_loss, stats.train_acc, stats.val_acc
        );
        if best
            .as_ref()
            .is_none_or(|(acc, loss, _, _)| val_acc > *acc || val_acc == *acc && val_loss < *loss)
        {
            best = Some((val_acc, val_loss, epoch, net.clone()));
        }
        history.push(stats);
    }
    let (_, _, best_epoch, network) = best.expect("at least one epoch");
    Ok(TrainOutcome { network, history, best_epoch })
}

/// Class probabilities for every example, computed in parallel.
pub fn predict_batch<T: Real>(net: &Network<T>, xs: &[Tensor<T>]) -> Result<Vec<Vec<f64>>> {
    xs.par_iter().map(|x| net.predict(x)).collect()
}

/// Accuracy and mean cross-entropy, summed in dataset order.
fn evaluate<T: Real>(net: &Network<T>, data: &[Example<T>]) -> Result<(f64, f64)> {
    let per = data
        .par_iter()
        .map(|(x, l)| {
            let z = net.logits(x)?;
            Ok(((argmax(&z) == *l) as usize, softmax_cross_entropy(&z, *l)?.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = data.len() as f64;
    Ok((
        per.iter().map(|p| p.0).sum::<usize>() as f64 / n,
        per.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

pub fn accuracy<T: Real>(net: &Network<T>, data: &[Example<T>]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let hits = data
        .par_iter()
        .map(|(x, l)| net.logits(x).map(|z| (argmax(&z) == *l) as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / data.len() as f64)
}
