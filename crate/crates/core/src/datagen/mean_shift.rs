//! Piecewise-constant mean with Gaussian noise; the input is a constant
//! column so the regressor can only learn the segment level.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{attach_truth, segment_of_rows, GeneratorSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanShiftParams {
    /// Segment levels, cycled when there are more segments than entries.
    pub levels: Vec<f64>,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            levels: vec![1.0, 2.0],
        }
    }
}

pub fn gen_mean_shift(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    spec.validate()?;
    let levels = &spec.mean_shift.levels;
    if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("mean-shift levels must be non-empty and finite"));
    }
    let (cps, len) = spec.layout();
    let seg = segment_of_rows(&cps, len);
    let level = |j: usize| levels[j % levels.len()];
    let mut rng = spec.stream_rng(stream::NOISE);
    let y = Array2::from_shape_fn((len, spec.h), |(t, _)| {
        level(seg[t]) + spec.sigma * rng.sample::<f64, _>(StandardNormal)
    });
    let x = Array2::ones((len, 1));
    let signals = (0..cps.len())
        .map(|j| spec.h as f64 * (level(j + 1) - level(j)).powi(2))
        .collect();
    attach_truth(x, y, cps, spec.sigma, signals)
}
