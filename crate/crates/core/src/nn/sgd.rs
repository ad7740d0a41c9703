use serde::{Deserialize, Serialize};

use super::ParamTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.0,
            weight_decay: 0.0,
        }
    }
}

/// Stochastic gradient descent with optional heavy-ball momentum and L2
/// weight decay. Both default to zero, giving `p <- p - lr * grad`.
#[derive(Debug, Clone)]
pub struct Sgd {
    config: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(config: SgdConfig) -> Self {
        Self {
            config,
            velocity: Vec::new(),
        }
    }

    /// Applies one update to every tensor, then zeroes the gradients.
    pub fn step(&mut self, params: Vec<&mut ParamTensor>, lr: f64) {
        let SgdConfig {
            momentum,
            weight_decay,
        } = self.config;
        if momentum != 0.0 && self.velocity.len() != params.len() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        for (t, p) in params.into_iter().enumerate() {
            let (values, grad) = p.values_and_grad_mut();
            for (i, (v, g)) in values.iter_mut().zip(grad.iter_mut()).enumerate() {
                let mut d = *g;
                if weight_decay != 0.0 {
                    d += weight_decay * *v;
                }
                if momentum != 0.0 {
                    let vel = &mut self.velocity[t][i];
                    *vel = momentum * *vel + d;
                    d = *vel;
                }
                *v -= lr * d;
                *g = 0.0;
            }
        }
    }
}
