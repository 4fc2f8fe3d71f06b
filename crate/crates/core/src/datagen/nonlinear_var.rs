//! Nonlinear VAR driven by a latent VAR(2) factor observed at a higher
//! frequency: `x_t = A x_{t−1} + Σ_{i=0..q} Λ_i ρ_i(f_{r·t−i} + ε_t)`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{companion, rescale_to_radius, spectral_radius};
use super::mlp::normal_matrix;
use super::{attach_truth, boundaries, check, GeneratorSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

const MAX_REDRAWS: usize = 100;
const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Tanh,
    Sin,
    LeakyRelu,
}

impl Nonlinearity {
    pub const MENU: [Nonlinearity; 3] = [Nonlinearity::Tanh, Nonlinearity::Sin, Nonlinearity::LeakyRelu];

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => v.tanh(),
            Nonlinearity::Sin => v.sin(),
            Nonlinearity::LeakyRelu => {
                if v >= 0.0 {
                    v
                } else {
                    LEAKY_SLOPE * v
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearVarParams {
    /// Highest factor lag `q`; terms `i = 0..=q` are used.
    pub lags: usize,
    pub factor_dim: usize,
    /// Factor steps per observation step.
    pub frequency: usize,
    /// Density of the `A` matrix.
    pub density: f64,
    /// Spectral radius of `A` and of the factor companion matrix.
    pub spectral_target: f64,
    /// Standard deviation of the `Λ_i` entries; default `1/sqrt(k·(q+1))`.
    pub loading_scale: Option<f64>,
}

impl Default for NonlinearVarParams {
    fn default() -> Self {
        Self {
            lags: 6,
            factor_dim: 10,
            frequency: 3,
            density: 0.2,
            spectral_target: 0.9,
            loading_scale: None,
        }
    }
}

/// Parameters active within one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearVarSegment {
    pub a: Array2<f64>,
    pub loadings: Vec<Array2<f64>>,
    pub rho: Vec<Nonlinearity>,
}

impl NonlinearVarSegment {
    /// `x_t` given `x_{t−1}`, the factor path and the factor-space noise `ε_t`.
    fn step(
        &self,
        x_prev: ArrayView1<'_, f64>,
        t: usize,
        frequency: usize,
        factors: ArrayView2<'_, f64>,
        eps: ArrayView1<'_, f64>,
    ) -> Array1<f64> {
        let mut next = self.a.dot(&x_prev);
        for (i, (lambda, rho)) in self.loadings.iter().zip(&self.rho).enumerate() {
            let idx = (frequency * t).saturating_sub(i);
            let arg = (&factors.row(idx) + &eps).mapv(|v| rho.apply(v));
            next += &lambda.dot(&arg);
        }
        next
    }
}

fn stable_matrix(dim: usize, density: f64, target: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    for _ in 0..MAX_REDRAWS {
        let mut m = [Array2::from_shape_simple_fn((dim, dim), || {
            if rng.random_bool(density) {
                rng.sample(StandardNormal)
            } else {
                0.0
            }
        })];
        let radius = rescale_to_radius(&mut m, target);
        if radius > 0.0 && radius.is_finite() {
            let [m] = m;
            return Ok(m);
        }
    }
    Err(Error::Generator(format!(
        "no stable draw after {MAX_REDRAWS} attempts"
    )))
}

fn draw_segment(spec: &GeneratorSpec, j: usize) -> Result<NonlinearVarSegment> {
    let params = &spec.nonlinear_var;
    let mut rng = spec.segment_rng(j);
    let a = stable_matrix(spec.h, params.density, params.spectral_target, &mut rng)?;
    let k = params.factor_dim;
    let scale = params
        .loading_scale
        .unwrap_or(1.0 / ((k * (params.lags + 1)) as f64).sqrt());
    let loadings = (0..=params.lags)
        .map(|_| normal_matrix(spec.h, k, scale, &mut rng))
        .collect();
    let rho = (0..=params.lags)
        .map(|_| Nonlinearity::MENU[rng.random_range(0..Nonlinearity::MENU.len())])
        .collect();
    Ok(NonlinearVarSegment { a, loadings, rho })
}

/// Latent VAR(2) path with `steps` rows and unit innovations.
fn simulate_factors(spec: &GeneratorSpec, steps: usize) -> Result<Array2<f64>> {
    let params = &spec.nonlinear_var;
    let k = params.factor_dim;
    let mut rng = spec.stream_rng(stream::BASE);
    for _ in 0..MAX_REDRAWS {
        let mut gammas = vec![
            normal_matrix(k, k, 1.0, &mut rng),
            normal_matrix(k, k, 1.0, &mut rng),
        ];
        let radius = rescale_to_radius(&mut gammas, params.spectral_target);
        if !(radius > 0.0 && radius.is_finite()) {
            continue;
        }
        debug_assert!(spectral_radius(&companion(&gammas)) <= params.spectral_target + 1e-9);
        let mut f = normal_matrix(steps.max(2), k, 1.0, &mut rng);
        for t in 2..f.nrows() {
            let next = gammas[0].dot(&f.row(t - 1)) + gammas[1].dot(&f.row(t - 2)) + f.row(t);
            f.row_mut(t).assign(&next);
        }
        return Ok(f);
    }
    Err(Error::Generator(format!(
        "no stable factor draw after {MAX_REDRAWS} attempts"
    )))
}

/// Run the observation recursion for `eps.nrows()` steps from `x0`.
/// Row `t` of `eps` is the factor-space noise of step `t + 1`; `segment_of`
/// maps a step index to its segment. Returns `x_0, …, x_T`.
pub fn simulate_nonlinear_var(
    segments: &[NonlinearVarSegment],
    segment_of: impl Fn(usize) -> usize,
    frequency: usize,
    factors: ArrayView2<'_, f64>,
    eps: ArrayView2<'_, f64>,
    x0: ArrayView1<'_, f64>,
) -> Array2<f64> {
    let steps = eps.nrows();
    let mut x = Array2::zeros((steps + 1, x0.len()));
    x.row_mut(0).assign(&x0);
    for t in 1..=steps {
        let seg = &segments[segment_of(t - 1)];
        let next = seg.step(x.row(t - 1), t, frequency, factors, eps.row(t - 1));
        x.row_mut(t).assign(&next);
    }
    x
}

/// Returns the dataset (`X = x_{t−1}`, `Y = x_t`) and the raw series
/// `x_0, …, x_{T_sum}`.
pub fn gen_nonlinear_var(spec: &GeneratorSpec) -> Result<(SeriesDataset, Array2<f64>)> {
    spec.validate()?;
    let params = &spec.nonlinear_var;
    if params.factor_dim == 0 || params.frequency == 0 {
        return Err(Error::config("factor_dim and frequency must be >= 1"));
    }
    if !(0.0..=1.0).contains(&params.density) {
        return Err(Error::config("density must lie in [0, 1]"));
    }
    if !(params.spectral_target > 0.0 && params.spectral_target < 1.0) {
        return Err(Error::config("spectral target must lie in (0, 1)"));
    }
    let (cps, len) = spec.layout();
    let segments = (0..=cps.len())
        .map(|j| draw_segment(spec, j))
        .collect::<Result<Vec<_>>>()?;
    let factors = simulate_factors(spec, params.frequency * len + 1)?;
    let mut rng = spec.stream_rng(stream::NOISE);
    let eps = normal_matrix(len, params.factor_dim, spec.sigma, &mut rng);
    let x0 = normal_matrix(1, spec.h, 1.0, &mut spec.stream_rng(stream::INPUT));
    let seg_of = super::segment_of_rows(&cps, len);
    let raw = simulate_nonlinear_var(
        &segments,
        |t| seg_of[t],
        params.frequency,
        factors.view(),
        eps.view(),
        x0.row(0),
    );
    check(raw.iter().all(|v| v.is_finite()), || "non-finite nonlinear VAR state".into())?;

    let x = raw.slice(s![..len, ..]).to_owned();
    let y = raw.slice(s![1.., ..]).to_owned();
    let b = boundaries(&cps, len);
    let signals = (0..cps.len())
        .map(|j| {
            let rows = b[j]..b[j + 2];
            let n = rows.len() as f64;
            rows.map(|i| {
                let t = i + 1;
                let u = segments[j].step(x.row(i), t, params.frequency, factors.view(), eps.row(i));
                let v = segments[j + 1].step(x.row(i), t, params.frequency, factors.view(), eps.row(i));
                (&u - &v).mapv(|d| d * d).sum()
            })
            .sum::<f64>()
                / n
        })
        .collect();
    Ok((attach_truth(x, y, cps, spec.sigma, signals)?, raw))
}
