use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        #[serde(default = "sgd_lr")]
        lr: f64,
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        #[serde(default = "adam_lr")]
        lr: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
}

fn sgd_lr() -> f64 {
    0.1
}
fn adam_lr() -> f64 {
    0.001
}
fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-7
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(adam_lr())
    }
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        Self::Sgd { lr, momentum: 0.0 }
    }

    /// Adam with the usual moment decay rates and the given learning rate.
    pub fn adam(lr: f64) -> Self {
        Self::Adam {
            lr,
            beta1: beta1(),
            beta2: beta2(),
            eps: adam_eps(),
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Sgd { lr, .. } | Self::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::ValidationError {
                field: format!("optimizer.{field}"),
                reason: reason.into(),
            })
        };
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return bad("lr", "must be > 0");
        }
        match *self {
            Self::Sgd { momentum, .. } => {
                if !(0.0..1.0).contains(&momentum) {
                    return bad("momentum", "must lie in [0, 1)");
                }
            }
            Self::Adam { beta1, beta2, eps, .. } => {
                if !(0.0..1.0).contains(&beta1) {
                    return bad("beta1", "must lie in [0, 1)");
                }
                if !(0.0..1.0).contains(&beta2) {
                    return bad("beta2", "must lie in [0, 1)");
                }
                if eps.is_nan() || eps <= 0.0 {
                    return bad("eps", "must be > 0");
                }
            }
        }
        Ok(())
    }
}

/// Optimizer with per-parameter state. Always descends on the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    /// Momentum buffer (SGD) or first moment (Adam).
    m: Vec<f64>,
    /// Second moment (Adam only).
    v: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

pub fn optimizer_update(opt: &mut OptimizerState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != opt.len() || grads.len() != opt.len() {
        return Err(Error::dims(
            format!("{} parameters", opt.len()),
            format!("{} params / {} grads", params.len(), grads.len()),
        ));
    }
    opt.step += 1;
    match opt.config {
        OptimizerConfig::Sgd { lr, momentum } => {
            for ((p, &g), buf) in params.iter_mut().zip(grads).zip(opt.m.iter_mut()) {
                *buf = momentum * *buf + g;
                *p -= lr * *buf;
            }
        }
        OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
            let t = opt.step as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(opt.m.iter_mut()).zip(opt.v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
    Ok(())
}
