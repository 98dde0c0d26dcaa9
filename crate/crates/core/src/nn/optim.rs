use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { lr: f64, momentum: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig::Sgd { lr, momentum: 0.0 }
    }

    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr, .. } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { lr, momentum } => lr >= 0.0 && (0.0..1.0).contains(&momentum),
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                lr >= 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

/// Optimizer state for one parameter list.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.len()]).collect::<Vec<_>>();
        let v = match config {
            OptimizerConfig::Adam { .. } => zeros(),
            OptimizerConfig::Sgd { .. } => Vec::new(),
        };
        Optimizer { config, step: 0, m: zeros(), v }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) {
        self.step += 1;
        match self.config {
            OptimizerConfig::Sgd { lr, momentum } => {
                let (lr, mu) = (T::from_f64c(lr), T::from_f64c(momentum));
                for ((p, g), vel) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    for ((pi, &gi), vi) in p.data.iter_mut().zip(&g.data).zip(vel.iter_mut()) {
                        *vi = mu * *vi + gi;
                        *pi -= lr * *vi;
                    }
                }
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 / (1.0 - beta1.powi(t));
                let c2 = 1.0 / (1.0 - beta2.powi(t));
                let (lr, b1, b2, eps) = (T::from_f64c(lr), T::from_f64c(beta1), T::from_f64c(beta2), T::from_f64c(eps));
                let (c1, c2) = (T::from_f64c(c1), T::from_f64c(c2));
                let one = T::one();
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    for (((pi, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = b1 * *mi + (one - b1) * gi;
                        *vi = b2 * *vi + (one - b2) * gi * gi;
                        let mhat = *mi * c1;
                        let vhat = *vi * c2;
                        *pi -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
