use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{MlpModel, MlpSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Stop once the relative loss decrease over `patience` epochs is below this.
    pub tolerance: f64,
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1500,
            tolerance: 1e-5,
            patience: 10,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance must be >= 0"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be >= 1"));
        }
        let a = &self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::config("ADAM requires lr > 0 and betas in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: MlpModel,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub converged: bool,
}

/// Train a freshly initialized network on one window.
pub fn train_window(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<MlpModel> {
    Ok(train_window_report(x, y, spec, cfg)?.model)
}

pub fn train_window_report(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_from(MlpModel::init(spec, cfg.seed), x, y, cfg)
}

/// Full-batch ADAM starting from an existing model. Stops once the best
/// loss seen has improved by less than `tolerance` (relative) over the last
/// `patience` epochs, and returns the best parameters visited.
pub fn train_from(
    mut model: MlpModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyWindow("training window has no rows"));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::shape(format!(
            "inputs have {} rows, targets {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let mut state = AdamState::new(&model, cfg.adam);
    // Running minimum of the loss, one entry per epoch.
    let mut best_history: Vec<f64> = Vec::with_capacity(cfg.max_epochs.min(4096) + 1);
    let mut best: Option<(f64, MlpModel)> = None;
    let mut initial_loss = None;
    let mut converged = false;

    for epoch in 0..cfg.max_epochs {
        let (loss, grads) = model.loss_and_gradients(x, y)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        initial_loss.get_or_insert(loss);
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, model.clone()));
        }
        let running = best.as_ref().map_or(loss, |(b, _)| *b);
        best_history.push(running);
        if epoch >= cfg.patience {
            let before = best_history[epoch - cfg.patience];
            if before <= 0.0 || (before - running) / before < cfg.tolerance {
                converged = true;
                break;
            }
        }
        state.step(&mut model, &grads)?;
    }

    let last_loss = model.loss(x, y)?;
    if !last_loss.is_finite() {
        return Err(Error::TrainingDiverged {
            epoch: best_history.len(),
            loss: last_loss,
        });
    }
    let (final_loss, model) = match best {
        Some((b, m)) if b <= last_loss => (b, m),
        _ => (last_loss, model),
    };
    Ok(TrainReport {
        model,
        epochs: best_history.len(),
        initial_loss: initial_loss.unwrap_or(final_loss),
        final_loss,
        converged,
    })
}
