use ndarray::{Array, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::model::{Gradients, MlpModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Gradients,
    second: Gradients,
}

impl AdamState {
    pub fn new(model: &MlpModel, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Gradients::zeros_like(model),
            second: Gradients::zeros_like(model),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &Gradients {
        &self.first
    }

    pub fn second_moments(&self) -> &Gradients {
        &self.second
    }

    /// One bias-corrected ADAM update of `model` in place.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        let (weights, biases) = model.params_mut();
        if grads.weights.len() != weights.len()
            || grads.biases.len() != biases.len()
            || self.first.weights.len() != weights.len()
            || self.first.biases.len() != biases.len()
        {
            return Err(Error::shape("gradient layout does not match model"));
        }
        self.step += 1;
        let cfg = self.config;
        let c1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for (((p, g), m), v) in weights
            .iter_mut()
            .zip(&grads.weights)
            .zip(&mut self.first.weights)
            .zip(&mut self.second.weights)
        {
            update(p, g, m, v, &cfg, c1, c2)?;
        }
        for (((p, g), m), v) in biases
            .iter_mut()
            .zip(&grads.biases)
            .zip(&mut self.first.biases)
            .zip(&mut self.second.biases)
        {
            update(p, g, m, v, &cfg, c1, c2)?;
        }
        Ok(())
    }
}

fn update<D: Dimension>(
    param: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != m.shape() {
        return Err(Error::shape(format!(
            "parameter shape {:?} vs gradient shape {:?}",
            param.shape(),
            grad.shape()
        )));
    }
    Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        });
    Ok(())
}

/// Convenience wrapper returning the updated model and state.
pub fn adam_step(
    mut model: MlpModel,
    grads: &Gradients,
    mut state: AdamState,
) -> Result<(MlpModel, AdamState)> {
    state.step(&mut model, grads)?;
    Ok((model, state))
}
