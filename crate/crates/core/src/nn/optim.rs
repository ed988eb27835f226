use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use crate::error::{Error, Result};

/// Plain SGD with multiplicative learning-rate decay toward a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub floor: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, decay: f64, floor: f64) -> Result<Self> {
        let cfg = SgdConfig {
            learning_rate,
            decay,
            floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if !(self.floor > 0.0 && self.floor <= self.learning_rate) {
            return Err(Error::invalid(format!(
                "floor must lie in (0, learning_rate], got {}",
                self.floor
            )));
        }
        Ok(())
    }

    /// `w ← w − η·∇w` for every trainable tensor; clears the gradients.
    /// Learning rate is left untouched.
    pub fn apply(&self, params: &mut MlpParams) -> Result<()> {
        for (i, t) in params.parameters_mut().enumerate() {
            if !t.requires_grad() {
                continue;
            }
            let grad = t
                .take_grad()
                .ok_or_else(|| Error::MissingGradient(format!("tensor #{i}")))?;
            let lr = self.learning_rate;
            for (w, g) in t.values_mut().iter_mut().zip(grad) {
                *w -= lr * g;
            }
        }
        Ok(())
    }

    /// `η ← max(floor, η·decay)`.
    pub fn decayed(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: (self.learning_rate * self.decay).max(self.floor),
            ..*self
        }
    }
}

/// One SGD step followed by one learning-rate decay.
pub fn sgd_step(params: &mut MlpParams, config: &SgdConfig) -> Result<SgdConfig> {
    config.apply(params)?;
    Ok(config.decayed())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for one [`MlpParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &MlpParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.parameters().map(|t| vec![0.0; t.numel()]).collect();
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut MlpParams) -> Result<()> {
        if params.parameters().count() != self.m.len() {
            return Err(Error::shape("Adam::step", self.m.len(), params.parameters().count()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, t) in params.parameters_mut().enumerate() {
            if !t.requires_grad() {
                continue;
            }
            let grad = t
                .take_grad()
                .ok_or_else(|| Error::MissingGradient(format!("tensor #{i}")))?;
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, (w, g)) in t.values_mut().iter_mut().zip(grad).enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
