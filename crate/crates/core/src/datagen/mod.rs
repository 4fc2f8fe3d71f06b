//! Synthetic series with known change points.
//!
//! Every family draws its per-segment model from an independent random
//! substream of the spec's seed, so a dataset is fully determined by its
//! [`GeneratorSpec`].

mod linalg;
mod lotka_volterra;
mod mean_shift;
mod mlp;
mod nonlinear_var;
mod var;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub use linalg::{companion, spectral_radius};
pub use lotka_volterra::{gen_lotka_volterra, rk4_step, LvParams, LvSystem, Resample};
pub use mean_shift::{gen_mean_shift, MeanShiftParams};
pub use mlp::{gen_mlp_piecewise, model_set, InputKind, MlpParams, Perturbation, PiecewiseModelSet};
pub use nonlinear_var::{
    gen_nonlinear_var, simulate_nonlinear_var, Nonlinearity, NonlinearVarParams, NonlinearVarSegment,
};
pub use var::{gen_var, simulate_var, VarOutput, VarParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    MlpPiecewise,
    Var,
    NonlinearVar,
    LotkaVolterra,
    MeanShift,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Family::MlpPiecewise => "mlp_piecewise",
            Family::Var => "var",
            Family::NonlinearVar => "nonlinear_var",
            Family::LotkaVolterra => "lotka_volterra",
            Family::MeanShift => "mean_shift",
        };
        f.write_str(name)
    }
}

/// Full description of a synthetic dataset.
///
/// `p` and `h` are the input and output widths for `mlp_piecewise`. For
/// `var` and `nonlinear_var`, `h` is the series dimension (inputs are lags).
/// For `lotka_volterra`, `p` is the number of prey (and of predators).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    #[serde(default = "default_dim")]
    pub p: usize,
    #[serde(default = "default_dim")]
    pub h: usize,
    /// Number of change points `N`.
    #[serde(default)]
    pub n_change_points: usize,
    /// Inclusive range of segment lengths.
    #[serde(default = "default_gaps")]
    pub gap_range: (usize, usize),
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fixed change points; overrides random placement together with `length`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_points: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default)]
    pub mlp: MlpParams,
    #[serde(default)]
    pub var: VarParams,
    #[serde(default)]
    pub nonlinear_var: NonlinearVarParams,
    #[serde(default)]
    pub lotka_volterra: LvParams,
    #[serde(default)]
    pub mean_shift: MeanShiftParams,
}

fn default_dim() -> usize {
    1
}

fn default_gaps() -> (usize, usize) {
    (300, 600)
}

impl GeneratorSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            p: 1,
            h: 1,
            n_change_points: 0,
            gap_range: default_gaps(),
            sigma: 0.0,
            seed: 0,
            change_points: None,
            length: None,
            mlp: MlpParams::default(),
            var: VarParams::default(),
            nonlinear_var: NonlinearVarParams::default(),
            lotka_volterra: LvParams::default(),
            mean_shift: MeanShiftParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.h == 0 {
            return Err(Error::config("dimensions p and h must be >= 1"));
        }
        let (lo, hi) = self.gap_range;
        if lo == 0 || lo > hi {
            return Err(Error::config(format!(
                "gap range ({lo}, {hi}) needs 1 <= min <= max"
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma must be finite and >= 0"));
        }
        match (&self.change_points, self.length) {
            (Some(cps), Some(len)) => crate::data::validate_change_points(cps, len)?,
            (None, None) => {}
            _ => {
                return Err(Error::config(
                    "fixed change points need both `change_points` and `length`",
                ))
            }
        }
        Ok(())
    }

    /// Change points and total length, either fixed or drawn from `gap_range`.
    pub fn layout(&self) -> (Vec<usize>, usize) {
        match (&self.change_points, self.length) {
            (Some(cps), Some(len)) => (cps.clone(), len),
            _ => {
                let mut rng = rng::child_rng(self.seed, rng::stream::PLACEMENT, 0);
                place_change_points(self.gap_range, self.n_change_points, &mut rng)
            }
        }
    }

    pub(crate) fn segment_rng(&self, segment: usize) -> Rng {
        rng::child_rng(self.seed, rng::stream::SEGMENT, segment as u64)
    }

    pub(crate) fn stream_rng(&self, stream: u64) -> Rng {
        rng::child_rng(self.seed, stream, 0)
    }
}

/// A generated dataset and, for autoregressive families, the raw series it
/// was flattened from.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: SeriesDataset,
    /// Raw series (`(T_sum + lags) × h`) for families whose inputs are lags.
    pub raw: Option<Array2<f64>>,
    pub lags: Option<usize>,
}

/// Draw `n + 1` segment lengths uniformly from `gap_range`; change points are
/// their cumulative sums.
pub fn place_change_points(gap_range: (usize, usize), n: usize, rng: &mut Rng) -> (Vec<usize>, usize) {
    let (lo, hi) = gap_range;
    let mut cps = Vec::with_capacity(n);
    let mut total = 0;
    for j in 0..=n {
        total += rng.random_range(lo..=hi);
        if j < n {
            cps.push(total);
        }
    }
    (cps, total)
}

/// Segment index of every row.
pub(crate) fn segment_of_rows(cps: &[usize], len: usize) -> Vec<usize> {
    let mut seg = 0;
    (0..len)
        .map(|t| {
            while seg < cps.len() && t >= cps[seg] {
                seg += 1;
            }
            seg
        })
        .collect()
}

/// Segment boundaries `[0, τ_1, …, τ_N, T_sum]`.
pub(crate) fn boundaries(cps: &[usize], len: usize) -> Vec<usize> {
    let mut b = Vec::with_capacity(cps.len() + 2);
    b.push(0);
    b.extend_from_slice(cps);
    b.push(len);
    b
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    match spec.family {
        Family::MlpPiecewise => Ok(Generated {
            dataset: gen_mlp_piecewise(spec)?,
            raw: None,
            lags: None,
        }),
        Family::Var => {
            let out = gen_var(spec)?;
            Ok(Generated {
                dataset: out.flattened,
                raw: Some(out.raw),
                lags: Some(spec.var.lags),
            })
        }
        Family::NonlinearVar => {
            let (dataset, raw) = gen_nonlinear_var(spec)?;
            Ok(Generated {
                dataset,
                raw: Some(raw),
                lags: Some(1),
            })
        }
        Family::LotkaVolterra => {
            let (dataset, raw) = gen_lotka_volterra(spec)?;
            Ok(Generated {
                dataset,
                raw: Some(raw),
                lags: Some(1),
            })
        }
        Family::MeanShift => Ok(Generated {
            dataset: gen_mean_shift(spec)?,
            raw: None,
            lags: None,
        }),
    }
}

pub(crate) fn attach_truth(
    x: Array2<f64>,
    y: Array2<f64>,
    cps: Vec<usize>,
    sigma: f64,
    signals: Vec<f64>,
) -> Result<SeriesDataset> {
    SeriesDataset::new(x, y)?
        .with_change_points(cps)?
        .with_noise_sigma(sigma)?
        .with_change_signals(signals)
}

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Generator(msg()))
    }
}
