//! Piecewise regression data from a ReLU network whose weights receive a
//! fresh sparse perturbation in every segment.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{attach_truth, boundaries, GeneratorSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

/// Distribution of the non-zero perturbation entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    /// `Bernoulli(rate) · N(0, 1)`.
    #[default]
    Normal,
    /// `Bernoulli(rate) · Uniform(0, 1)`, the non-subgaussian variant.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Rows i.i.d. `N(0, I)`.
    #[default]
    Iid,
    /// Each coordinate an AR(1) with unit stationary variance.
    Var1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    /// Hidden widths of the generating network; default `[max(p/4, 8); 2]`.
    pub hidden: Option<Vec<usize>>,
    /// Probability that a perturbation entry is non-zero.
    pub sparsity: f64,
    pub perturbation: Perturbation,
    /// Standard deviation of the shared base weights.
    pub base_scale: f64,
    pub input: InputKind,
    /// AR coefficient of the dependent input.
    pub input_ar: f64,
    /// Rescale perturbations so every consecutive pair of segment models
    /// differs by this expected squared distance.
    pub signal_target: Option<f64>,
    /// Monte-Carlo sample size used for signal normalization.
    pub signal_samples: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: None,
            sparsity: 0.1,
            perturbation: Perturbation::Normal,
            base_scale: 1.0,
            input: InputKind::Iid,
            input_ar: 0.9,
            signal_target: None,
            signal_samples: 5000,
        }
    }
}

/// Shared base weights, per-segment perturbations and their scale factors.
/// Segment `j` uses weights `W_i + scale_j · P_{ij}` with no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseModelSet {
    pub base: Vec<Array2<f64>>,
    pub perturbations: Vec<Vec<Array2<f64>>>,
    pub scales: Vec<f64>,
}

impl PiecewiseModelSet {
    pub fn segments(&self) -> usize {
        self.perturbations.len()
    }

    fn weights_with(&self, segment: usize, scale: f64) -> Vec<Array2<f64>> {
        self.base
            .iter()
            .zip(&self.perturbations[segment])
            .map(|(w, p)| w + &(p * scale))
            .collect()
    }

    pub fn weights(&self, segment: usize) -> Vec<Array2<f64>> {
        self.weights_with(segment, self.scales[segment])
    }

    /// Evaluate segment `segment`'s network on every row of `x`.
    pub fn eval(&self, segment: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
        forward(&self.weights(segment), x)
    }

    /// Fraction of non-zero perturbation entries.
    pub fn density(&self) -> f64 {
        let (nz, total) = self
            .perturbations
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(nz, total), p| {
                (nz + p.iter().filter(|&&v| v != 0.0).count(), total + p.len())
            });
        nz as f64 / total.max(1) as f64
    }
}

fn forward(weights: &[Array2<f64>], x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut h = x.dot(&weights[0].t());
    for w in &weights[1..] {
        h.mapv_inplace(|z| z.max(0.0));
        h = h.dot(&w.t());
    }
    h
}

fn mean_sq_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n
}

pub(crate) fn normal_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.sample::<f64, _>(StandardNormal))
}

fn layer_widths(spec: &GeneratorSpec) -> Result<Vec<usize>> {
    let default_hidden = (spec.p / 4).max(8);
    let hidden = spec
        .mlp
        .hidden
        .clone()
        .unwrap_or_else(|| vec![default_hidden, default_hidden]);
    if hidden.iter().any(|&w| w == 0) {
        return Err(Error::config("generator hidden widths must be >= 1"));
    }
    let mut widths = vec![spec.p];
    widths.extend(hidden);
    widths.push(spec.h);
    Ok(widths)
}

impl PiecewiseModelSet {
    /// Draw base weights and one perturbation set per segment.
    pub fn draw(spec: &GeneratorSpec, segments: usize) -> Result<Self> {
        let params = &spec.mlp;
        if !(0.0..=1.0).contains(&params.sparsity) {
            return Err(Error::config("perturbation sparsity must lie in [0, 1]"));
        }
        if !(params.base_scale > 0.0) {
            return Err(Error::config("base_scale must be > 0"));
        }
        let widths = layer_widths(spec)?;
        let mut rng = spec.stream_rng(stream::BASE);
        let base: Vec<_> = widths
            .windows(2)
            .map(|w| normal_matrix(w[1], w[0], params.base_scale, &mut rng))
            .collect();
        let perturbations = (0..segments)
            .map(|j| {
                let mut rng = spec.segment_rng(j);
                widths
                    .windows(2)
                    .map(|w| {
                        Array2::from_shape_simple_fn((w[1], w[0]), || {
                            if rng.random_bool(params.sparsity) {
                                match params.perturbation {
                                    Perturbation::Normal => rng.sample(StandardNormal),
                                    Perturbation::Uniform => rng.random_range(0.0..1.0),
                                }
                            } else {
                                0.0
                            }
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            base,
            perturbations,
            scales: vec![1.0; segments],
        })
    }

    /// Choose per-segment scales so that each consecutive pair of models
    /// has expected squared difference `target` on the sample `x`.
    pub fn normalize_signal(&mut self, x: ArrayView2<'_, f64>, target: f64) -> Result<()> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::config("signal target must be positive"));
        }
        let segments = self.segments();
        if segments < 2 {
            return Ok(());
        }
        let pair_signal = |set: &Self, j: usize, s_prev: f64, s_next: f64| {
            let a = forward(&set.weights_with(j - 1, s_prev), x);
            let b = forward(&set.weights_with(j, s_next), x);
            mean_sq_diff(&a, &b)
        };

        // Common scale putting the average pair signal at the target.
        let mean_signal = |s: f64| {
            (1..segments).map(|j| pair_signal(self, j, s, s)).sum::<f64>() / (segments - 1) as f64
        };
        let common = solve_increasing(|s| mean_signal(s) - target, 1.0)
            .ok_or_else(|| Error::Generator("cannot reach the signal target".into()))?;

        // Exact pairwise adjustment, one segment at a time.
        let mut scales = vec![common; segments];
        for j in 1..segments {
            let prev = scales[j - 1];
            let f = |s: f64| pair_signal(self, j, prev, s) - target;
            scales[j] = match solve_increasing(&f, common.max(1e-12)) {
                Some(s) if f(0.0) < 0.0 => s,
                _ => {
                    // The previous model is already far enough from the base;
                    // take the grid point closest to the target.
                    (0..=64)
                        .map(|k| common * 4.0 * k as f64 / 64.0)
                        .min_by(|&a, &b| f(a).abs().total_cmp(&f(b).abs()))
                        .expect("non-empty grid")
                }
            };
        }
        self.scales = scales;
        Ok(())
    }
}

/// Smallest-bracket bisection for a root of `f` on `[0, ∞)` assuming
/// `f(0) < 0` and `f` eventually positive.
fn solve_increasing(f: impl Fn(f64) -> f64, start: f64) -> Option<f64> {
    let mut hi = start;
    let mut grow = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn draw_inputs(spec: &GeneratorSpec, len: usize) -> Result<Array2<f64>> {
    let mut rng = spec.stream_rng(stream::INPUT);
    match spec.mlp.input {
        InputKind::Iid => Ok(normal_matrix(len, spec.p, 1.0, &mut rng)),
        InputKind::Var1 => {
            let a = spec.mlp.input_ar;
            if !(a.abs() < 1.0) {
                return Err(Error::config("input_ar must lie in (-1, 1)"));
            }
            let innovation = (1.0 - a * a).sqrt();
            let mut x = normal_matrix(len, spec.p, 1.0, &mut rng);
            for t in 1..len {
                let (prev, mut cur) = x.multi_slice_mut((s![t - 1, ..], s![t, ..]));
                cur.zip_mut_with(&prev, |c, &p| *c = a * p + innovation * *c);
            }
            Ok(x)
        }
    }
}

/// Average `‖f_{j+1}(x) − f_j(x)‖²` over the rows of the two segments
/// adjacent to each change point.
fn boundary_signals(models: &PiecewiseModelSet, x: ArrayView2<'_, f64>, cps: &[usize]) -> Vec<f64> {
    let b = boundaries(cps, x.nrows());
    (0..cps.len())
        .map(|j| {
            let rows = x.slice(s![b[j]..b[j + 2], ..]);
            mean_sq_diff(&models.eval(j, rows), &models.eval(j + 1, rows))
        })
        .collect()
}

pub fn gen_mlp_piecewise(spec: &GeneratorSpec) -> Result<SeriesDataset> {
    spec.validate()?;
    let (cps, len) = spec.layout();
    let segments = cps.len() + 1;
    let mut models = PiecewiseModelSet::draw(spec, segments)?;
    if let Some(target) = spec.mlp.signal_target {
        let mut rng = spec.stream_rng(stream::SIGNAL);
        let sample = normal_matrix(spec.mlp.signal_samples.max(1), spec.p, 1.0, &mut rng);
        models.normalize_signal(sample.view(), target)?;
    }
    let x = draw_inputs(spec, len)?;
    let mut y = Array2::zeros((len, spec.h));
    let b = boundaries(&cps, len);
    for j in 0..segments {
        let rows = s![b[j]..b[j + 1], ..];
        y.slice_mut(rows).assign(&models.eval(j, x.slice(rows)));
    }
    if spec.sigma > 0.0 {
        let mut rng = spec.stream_rng(stream::NOISE);
        y.mapv_inplace(|v| v + spec.sigma * rng.sample::<f64, _>(StandardNormal));
    }
    let signals = boundary_signals(&models, x.view(), &cps);
    attach_truth(x, y, cps, spec.sigma, signals)
}

/// Regenerate the model set used by [`gen_mlp_piecewise`] for `spec`.
pub fn model_set(spec: &GeneratorSpec) -> Result<PiecewiseModelSet> {
    let (cps, _) = spec.layout();
    let mut models = PiecewiseModelSet::draw(spec, cps.len() + 1)?;
    if let Some(target) = spec.mlp.signal_target {
        let mut rng = spec.stream_rng(stream::SIGNAL);
        let sample = normal_matrix(spec.mlp.signal_samples.max(1), spec.p, 1.0, &mut rng);
        models.normalize_signal(sample.view(), target)?;
    }
    Ok(models)
}
