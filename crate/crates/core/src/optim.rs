use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SrResNet;
use crate::nn::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    /// Adaptive-moment descent with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Plain `theta -= lr * grad`.
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state bound to one model's parameter order.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, model: &mut SrResNet<T>) {
        self.steps += 1;
        let lr = T::lit(self.lr);
        let mut params = model.named_params_mut();
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, p) in params.iter_mut() {
                    for (v, &g) in p.value.iter_mut().zip(&p.grad) {
                        *v -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first.is_empty() {
                    self.first = params.iter().map(|(_, p)| vec![T::zero(); p.len()]).collect();
                    self.second = self.first.clone();
                }
                let t = self.steps as i32;
                let (b1, b2) = (T::lit(beta1), T::lit(beta2));
                let c1 = T::one() / (T::one() - b1.powi(t));
                let c2 = T::one() / (T::one() - b2.powi(t));
                let eps = T::lit(eps);
                for (((_, p), m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    for i in 0..p.value.len() {
                        let g = p.grad[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * g;
                        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                        let mhat = m[i] * c1;
                        let vhat = v[i] * c2;
                        p.value[i] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
