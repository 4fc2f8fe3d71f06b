//! Sliding-window criterion curve.
//!
//! For each evaluation time `t` a fresh network is fitted to rows
//! `[t − T1, t)` and `E(t)` is its summed squared prediction error over the
//! test rows `[t, t + T2)`.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::DetectionConfig;
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::nn::{self, MlpModel, MlpSpec, TrainConfig};
use crate::rng;

/// The criterion `t ↦ E(t)` over its valid domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    #[serde(rename = "t")]
    pub t_values: Vec<usize>,
    #[serde(rename = "e")]
    pub e_values: Vec<f64>,
    pub t1: usize,
    pub t2: usize,
    /// Base spacing of the evaluation grid (refined curves are denser near
    /// their refinement centers).
    pub stride: usize,
    pub provenance: String,
}

impl ErrorCurve {
    pub fn new(
        t_values: Vec<usize>,
        e_values: Vec<f64>,
        t1: usize,
        t2: usize,
        stride: usize,
    ) -> Result<Self> {
        if t_values.len() != e_values.len() {
            return Err(Error::shape(format!(
                "{} times for {} curve values",
                t_values.len(),
                e_values.len()
            )));
        }
        if t_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("curve times must be strictly increasing"));
        }
        if e_values.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::config("curve values must be finite and >= 0"));
        }
        Ok(Self {
            t_values,
            e_values,
            t1,
            t2,
            stride,
            provenance: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.t_values.iter().copied().zip(self.e_values.iter().copied())
    }

    /// Value at `t`, if `t` is on the curve.
    pub fn value_at(&self, t: usize) -> Option<f64> {
        self.t_values
            .binary_search(&t)
            .ok()
            .map(|i| self.e_values[i])
    }
}

/// Summed squared Euclidean prediction error over the rows of a test window.
pub fn test_error(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyWindow("test window has no rows"));
    }
    let pred = model.predict(x)?;
    nn_sum_squared_error(&pred, y)
}

fn nn_sum_squared_error(pred: &ndarray::Array2<f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != y.dim() {
        return Err(Error::shape(format!(
            "prediction shape {:?} does not match target shape {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    Ok(pred
        .iter()
        .zip(y.iter())
        .map(|(p, t)| (t - p) * (t - p))
        .sum())
}

/// Evaluation times `T1, T1 + stride, …` with `t + T2 ≤ T_sum`.
pub fn curve_domain(t_sum: usize, t1: usize, t2: usize, stride: usize) -> Result<Vec<usize>> {
    if t1 == 0 || t2 == 0 || stride == 0 {
        return Err(Error::config("T1, T2 and stride must be >= 1"));
    }
    if t_sum < t1 + t2 {
        return Err(Error::SeriesTooShort {
            len: t_sum,
            required: t1 + t2,
        });
    }
    Ok((t1..=t_sum - t2).step_by(stride).collect())
}

struct WindowTrainer<'a> {
    data: &'a SeriesDataset,
    cfg: &'a DetectionConfig,
    spec: MlpSpec,
}

impl<'a> WindowTrainer<'a> {
    fn new(data: &'a SeriesDataset, cfg: &'a DetectionConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.mlp_spec(data.input_dim(), data.output_dim())?;
        Ok(Self { data, cfg, spec })
    }

    fn train_config(&self, t: usize) -> TrainConfig {
        TrainConfig {
            seed: rng::derive(self.cfg.seed, rng::stream::WINDOW, t as u64),
            ..self.cfg.train.clone()
        }
    }

    fn fit(&self, t: usize, start: Option<MlpModel>) -> Result<MlpModel> {
        let (x, y) = self.data.rows(t - self.cfg.t1, t);
        let train_cfg = self.train_config(t);
        let report = match start {
            Some(model) => nn::train_from(model, x, y, &train_cfg),
            None => nn::train_window_report(x, y, &self.spec, &train_cfg),
        }
        .map_err(|source| Error::WindowDiverged {
            t,
            source: Box::new(source),
        })?;
        Ok(report.model)
    }

    fn score(&self, t: usize, model: &MlpModel) -> Result<f64> {
        let (x, y) = self.data.rows(t, t + self.cfg.t2);
        test_error(model, x, y)
    }

    fn evaluate(&self, t: usize) -> Result<f64> {
        let model = self.fit(t, None)?;
        self.score(t, &model)
    }

    /// Evaluate `times` (ascending) honoring the worker count. Warm starts
    /// only apply along a contiguous scan.
    fn evaluate_all(&self, times: &[usize], contiguous: bool) -> Result<Vec<f64>> {
        if self.cfg.warm_start && contiguous {
            let mut values = Vec::with_capacity(times.len());
            let mut previous: Option<MlpModel> = None;
            for &t in times {
                let model = self.fit(t, previous.take())?;
                values.push(self.score(t, &model)?);
                previous = Some(model);
            }
            return Ok(values);
        }
        let run = || -> Vec<Result<f64>> { times.par_iter().map(|&t| self.evaluate(t)).collect() };
        let results = if self.cfg.workers == 1 {
            times.iter().map(|&t| self.evaluate(t)).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.workers)
                .build()
                .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
            pool.install(run)
        };
        // Ascending order, so the reported failure is the earliest window.
        results.into_iter().collect()
    }
}

/// Compute the criterion curve on the grid `T1, T1 + stride, …`.
pub fn compute_error_curve(data: &SeriesDataset, cfg: &DetectionConfig) -> Result<ErrorCurve> {
    let times = curve_domain(data.len(), cfg.t1, cfg.t2, cfg.stride)?;
    let trainer = WindowTrainer::new(data, cfg)?;
    let values = trainer.evaluate_all(&times, true)?;
    let mut curve = ErrorCurve::new(times, values, cfg.t1, cfg.t2, cfg.stride)?;
    curve.provenance = cfg.training_digest();
    Ok(curve)
}

/// Add stride-1 evaluations within `±radius` of each center to a coarse curve.
pub fn refine_curve(
    data: &SeriesDataset,
    cfg: &DetectionConfig,
    coarse: &ErrorCurve,
    centers: &[usize],
    radius: usize,
) -> Result<ErrorCurve> {
    if radius == 0 || centers.is_empty() {
        return Ok(coarse.clone());
    }
    if coarse.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let lo = cfg.t1;
    let hi = data
        .len()
        .checked_sub(cfg.t2)
        .filter(|&hi| hi >= lo)
        .ok_or(Error::SeriesTooShort {
            len: data.len(),
            required: cfg.t1 + cfg.t2,
        })?;
    let mut merged: BTreeMap<usize, f64> = coarse.points().collect();
    let mut missing: Vec<usize> = Vec::new();
    for &c in centers {
        let start = c.saturating_sub(radius).max(lo);
        let end = (c + radius).min(hi);
        missing.extend((start..=end).filter(|t| !merged.contains_key(t)));
    }
    missing.sort_unstable();
    missing.dedup();
    if !missing.is_empty() {
        let trainer = WindowTrainer::new(data, cfg)?;
        let values = trainer.evaluate_all(&missing, false)?;
        merged.extend(missing.into_iter().zip(values));
    }
    let (t_values, e_values): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
    let mut curve = ErrorCurve::new(t_values, e_values, coarse.t1, coarse.t2, coarse.stride)?;
    curve.provenance = coarse.provenance.clone();
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn domain_arithmetic() {
        let d = curve_domain(1000, 100, 100, 1).unwrap();
        assert_eq!(d.len(), 801);
        assert_eq!((d[0], d[800]), (100, 900));
        let d = curve_domain(1000, 100, 100, 10).unwrap();
        assert_eq!(d.len(), 81);
        assert!(matches!(
            curve_domain(150, 100, 100, 1),
            Err(Error::SeriesTooShort { required: 200, .. })
        ));
    }

    #[test]
    fn test_error_is_summed() {
        let spec = MlpSpec::new(vec![1, 2]).unwrap();
        let model = MlpModel::from_parts(spec, vec![array![[0.0], [0.0]]], vec![]).unwrap();
        let e = test_error(&model, array![[1.0]].view(), array![[3.0, 4.0]].view()).unwrap();
        assert_eq!(e, 25.0);
        let e = test_error(
            &model,
            array![[1.0], [2.0]].view(),
            array![[3.0, 4.0], [1.0, 0.0]].view(),
        )
        .unwrap();
        assert_eq!(e, 26.0);
    }

    #[test]
    fn test_error_zero_for_exact_model() {
        let spec = MlpSpec::new(vec![2, 3, 2]).unwrap();
        let model = MlpModel::init(&spec, 1);
        let x = Array2::from_shape_fn((5, 2), |(i, j)| (i as f64) - (j as f64) * 0.5);
        let y = model.predict(x.view()).unwrap();
        assert_eq!(test_error(&model, x.view(), y.view()).unwrap(), 0.0);
        assert!(test_error(&model, Array2::zeros((0, 2)).view(), Array2::zeros((0, 2)).view())
            .is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(ErrorCurve::new(vec![1, 2], vec![0.0], 1, 1, 1).is_err());
        assert!(ErrorCurve::new(vec![2, 1], vec![0.0, 1.0], 1, 1, 1).is_err());
        assert!(ErrorCurve::new(vec![1, 2], vec![0.0, -1.0], 1, 1, 1).is_err());
        let c = ErrorCurve::new(vec![1, 3], vec![0.5, 1.0], 1, 1, 2).unwrap();
        assert_eq!(c.value_at(3), Some(1.0));
        assert_eq!(c.value_at(2), None);
    }
}
