//! Piecewise VAR(q) series with sparse, spectrally rescaled coefficients.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{companion, rescale_to_radius};
use super::{attach_truth, boundaries, check, GeneratorSpec};
use crate::data::{lagged, SeriesDataset};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarParams {
    pub lags: usize,
    /// Probability that a coefficient entry is non-zero.
    pub density: f64,
    /// Companion spectral radius after rescaling.
    pub spectral_target: f64,
    /// Redraw the first `q` values of every segment instead of continuing
    /// the previous segment's state.
    pub restart: bool,
}

impl Default for VarParams {
    fn default() -> Self {
        Self {
            lags: 4,
            density: 0.2,
            spectral_target: 0.9,
            restart: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarOutput {
    /// `(T_sum + q) × h`; the first `q` rows are the initial state.
    pub raw: Array2<f64>,
    /// `T_sum` rows with inputs `(Y_{t−1}, …, Y_{t−q})` and output `Y_t`.
    pub flattened: SeriesDataset,
    /// Per segment, `[A_1, …, A_q]`.
    pub coefficients: Vec<Vec<Array2<f64>>>,
}

fn draw_coefficients(spec: &GeneratorSpec, segment: usize) -> Vec<Array2<f64>> {
    let params = &spec.var;
    let h = spec.h;
    let mut rng = spec.segment_rng(segment);
    let mut coeffs: Vec<Array2<f64>> = (0..params.lags)
        .map(|_| {
            Array2::from_shape_simple_fn((h, h), || {
                if rng.random_bool(params.density) {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                }
            })
        })
        .collect();
    // A nilpotent draw (radius 0) is already stable and is left unscaled.
    rescale_to_radius(&mut coeffs, params.spectral_target);
    coeffs
}

/// `Y_t = Σ_k A_k Y_{t−k}` for `steps` steps after the `q` rows of `init`
/// (most recent last). Returns `init` followed by the new rows.
pub fn simulate_var(coeffs: &[Array2<f64>], init: ArrayView2<'_, f64>, steps: usize) -> Array2<f64> {
    let q = coeffs.len();
    let h = init.ncols();
    let mut out = Array2::zeros((q + steps, h));
    out.slice_mut(s![..q, ..]).assign(&init);
    for t in q..q + steps {
        let next = var_step(coeffs, out.view(), t);
        out.row_mut(t).assign(&next);
    }
    out
}

fn var_step(coeffs: &[Array2<f64>], series: ArrayView2<'_, f64>, t: usize) -> Array1<f64> {
    let mut next = Array1::zeros(series.ncols());
    for (k, a) in coeffs.iter().enumerate() {
        next += &a.dot(&series.row(t - k - 1));
    }
    next
}

pub fn gen_var(spec: &GeneratorSpec) -> Result<VarOutput> {
    spec.validate()?;
    let params = &spec.var;
    if params.lags == 0 {
        return Err(Error::config("VAR lag count must be >= 1"));
    }
    if !(0.0..=1.0).contains(&params.density) {
        return Err(Error::config("VAR density must lie in [0, 1]"));
    }
    if !(params.spectral_target > 0.0 && params.spectral_target < 1.0) {
        return Err(Error::config("spectral target must lie in (0, 1)"));
    }
    let (cps, len) = spec.layout();
    if params.lags >= len {
        return Err(Error::SeriesTooShort {
            len,
            required: params.lags + 1,
        });
    }
    let q = params.lags;
    let h = spec.h;
    let coefficients: Vec<_> = (0..=cps.len()).map(|j| draw_coefficients(spec, j)).collect();
    for (j, c) in coefficients.iter().enumerate() {
        let radius = super::spectral_radius(&companion(c));
        check(radius <= params.spectral_target + 1e-9, || {
            format!("segment {j} companion radius {radius} above target")
        })?;
    }

    let mut rng: Rng = spec.stream_rng(stream::NOISE);
    let mut raw = Array2::zeros((len + q, h));
    for v in raw.slice_mut(s![..q, ..]).iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let b = boundaries(&cps, len);
    for j in 0..=cps.len() {
        for t in b[j]..b[j + 1] {
            let r = t + q;
            if params.restart && j > 0 && t < b[j] + q {
                for v in raw.row_mut(r).iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                continue;
            }
            let mut next = var_step(&coefficients[j], raw.view(), r);
            if spec.sigma > 0.0 {
                next.mapv_inplace(|v| v + spec.sigma * rng.sample::<f64, _>(StandardNormal));
            }
            check(next.iter().all(|v| v.is_finite()), || {
                format!("non-finite VAR state at row {t}")
            })?;
            raw.row_mut(r).assign(&next);
        }
    }

    let flat = lagged(raw.view(), q)?;
    let signals = (0..cps.len())
        .map(|j| {
            let (x, _) = flat.rows(b[j], b[j + 2]);
            let diff: Vec<Array2<f64>> = coefficients[j + 1]
                .iter()
                .zip(&coefficients[j])
                .map(|(a, c)| a - c)
                .collect();
            let stacked = ndarray::concatenate(
                ndarray::Axis(1),
                &diff.iter().map(|d| d.view()).collect::<Vec<_>>(),
            )
            .expect("equal row counts");
            let d = x.dot(&stacked.t());
            d.iter().map(|v| v * v).sum::<f64>() / x.nrows() as f64
        })
        .collect();
    let (x, y) = flat.into_parts();
    Ok(VarOutput {
        raw,
        flattened: attach_truth(x, y, cps, spec.sigma, signals)?,
        coefficients,
    })
}
