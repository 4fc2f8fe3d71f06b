//! Multi-species Lotka-Volterra dynamics integrated with classical RK4.
//!
//! State layout is `[x^1 … x^p, y^1 … y^p]` (prey then predators).

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{attach_truth, boundaries, GeneratorSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

pub const STATE_FLOOR: f64 = 1e-6;

/// What changes at a change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resample {
    #[default]
    Parents,
    Rates,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LvParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Prey per predator. A prey's parents are the predators eating it.
    pub parents: usize,
    pub dt: f64,
    pub resample: Resample,
    /// Relative half-width of the uniform rate perturbation when rates are
    /// redrawn.
    pub rate_jitter: f64,
}

impl Default for LvParams {
    fn default() -> Self {
        Self {
            alpha: 1.1,
            beta: 0.4,
            delta: 0.6,
            gamma: 0.4,
            parents: 2,
            dt: 1e-2,
            resample: Resample::Parents,
            rate_jitter: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvSystem {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Predators feeding on each prey.
    pub prey_parents: Vec<Vec<usize>>,
    /// Prey eaten by each predator.
    pub predator_parents: Vec<Vec<usize>>,
}

impl LvSystem {
    pub fn species(&self) -> usize {
        self.prey_parents.len()
    }

    pub fn derivative(&self, state: ArrayView1<'_, f64>) -> Array1<f64> {
        let p = self.species();
        let (x, y) = (state.slice(s![..p]), state.slice(s![p..]));
        let mut d = Array1::zeros(2 * p);
        for i in 0..p {
            let pressure: f64 = self.prey_parents[i].iter().map(|&j| y[j]).sum();
            d[i] = self.alpha * x[i] - self.beta * x[i] * pressure - self.alpha * x[i] * x[i];
        }
        for j in 0..p {
            let food: f64 = self.predator_parents[j].iter().map(|&k| x[k]).sum();
            d[p + j] = self.delta * y[j] * food - self.gamma * y[j];
        }
        d
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(sys: &LvSystem, state: ArrayView1<'_, f64>, dt: f64) -> Array1<f64> {
    let k1 = sys.derivative(state);
    let k2 = sys.derivative((&state + &(&k1 * (dt / 2.0))).view());
    let k3 = sys.derivative((&state + &(&k2 * (dt / 2.0))).view());
    let k4 = sys.derivative((&state + &(&k3 * dt)).view());
    &state + &((k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (dt / 6.0))
}

/// Advance one sampling interval (`steps` RK4 steps) with the positivity
/// clamp. `step0` numbers the first step for error reporting.
fn advance(sys: &LvSystem, state: ArrayView1<'_, f64>, dt: f64, steps: usize, step0: usize) -> Result<Array1<f64>> {
    let mut cur = state.to_owned();
    for k in 0..steps {
        cur = rk4_step(sys, cur.view(), dt);
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration { step: step0 + k });
        }
        cur.mapv_inplace(|v| v.max(STATE_FLOOR));
    }
    Ok(cur)
}

fn draw_parents(p: usize, count: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let count = count.min(p);
    (0..p).map(|_| {
        let mut v = sample(rng, p, count).into_vec();
        v.sort_unstable();
        v
    })
    .collect()
}

/// Invert the predator diet so every prey feels exactly the predators that
/// eat it; otherwise a predator could grow on prey it never depletes.
fn eaten_by(predator_parents: &[Vec<usize>], p: usize) -> Vec<Vec<usize>> {
    let mut prey = vec![Vec::new(); p];
    for (j, diet) in predator_parents.iter().enumerate() {
        for &i in diet {
            prey[i].push(j);
        }
    }
    prey
}

fn jitter(rate: f64, width: f64, rng: &mut Rng) -> f64 {
    rate * (1.0 + rng.random_range(-width..=width))
}

fn draw_system(spec: &GeneratorSpec, segment: usize) -> LvSystem {
    let params = &spec.lotka_volterra;
    let p = spec.p;
    let mut base = spec.stream_rng(stream::BASE);
    let mut seg = spec.segment_rng(segment);
    let new_parents = matches!(params.resample, Resample::Parents | Resample::Both);
    let new_rates = matches!(params.resample, Resample::Rates | Resample::Both);
    let parent_rng = if new_parents { &mut seg } else { &mut base };
    let predator_parents = draw_parents(p, params.parents, parent_rng);
    let prey_parents = eaten_by(&predator_parents, p);
    let mut rate = |r: f64| {
        if new_rates {
            jitter(r, params.rate_jitter, &mut seg)
        } else {
            r
        }
    };
    LvSystem {
        alpha: rate(params.alpha),
        beta: rate(params.beta),
        delta: rate(params.delta),
        gamma: rate(params.gamma),
        prey_parents,
        predator_parents,
    }
}

/// Returns the dataset (`X` = observed state at sample `t − 1`, `Y` = at
/// sample `t`) and the observed series of `T_sum + 1` samples.
pub fn gen_lotka_volterra(spec: &GeneratorSpec) -> Result<(SeriesDataset, Array2<f64>)> {
    spec.validate()?;
    let params = &spec.lotka_volterra;
    for (name, v) in [
        ("alpha", params.alpha),
        ("beta", params.beta),
        ("delta", params.delta),
        ("gamma", params.gamma),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(format!("rate {name} must be > 0")));
        }
    }
    if params.parents == 0 {
        return Err(Error::config("parents per species must be >= 1"));
    }
    if !(params.dt > 0.0 && params.dt <= 1.0) {
        return Err(Error::config("dt must lie in (0, 1]"));
    }
    if !(0.0..1.0).contains(&params.rate_jitter) {
        return Err(Error::config("rate_jitter must lie in [0, 1)"));
    }
    let steps = (1.0 / params.dt).round() as usize;
    let (cps, len) = spec.layout();
    let systems: Vec<_> = (0..=cps.len()).map(|j| draw_system(spec, j)).collect();
    let seg_of = super::segment_of_rows(&cps, len);

    let mut init_rng = spec.stream_rng(stream::INPUT);
    let mut clean = Array2::zeros((len + 1, 2 * spec.p));
    clean
        .row_mut(0)
        .mapv_inplace(|_| init_rng.random_range(0.2..1.0));
    for t in 0..len {
        let next = advance(&systems[seg_of[t]], clean.row(t), params.dt, steps, t * steps)?;
        clean.row_mut(t + 1).assign(&next);
    }

    let b = boundaries(&cps, len);
    let signals = (0..cps.len())
        .map(|j| {
            let rows = b[j]..b[j + 2];
            let n = rows.len() as f64;
            let mut total = 0.0;
            for t in rows {
                let u = advance(&systems[j], clean.row(t), params.dt, steps, t * steps)?;
                let v = advance(&systems[j + 1], clean.row(t), params.dt, steps, t * steps)?;
                total += (&u - &v).mapv(|d| d * d).sum();
            }
            Ok(total / n)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut observed = clean;
    if spec.sigma > 0.0 {
        let mut rng = spec.stream_rng(stream::NOISE);
        observed.mapv_inplace(|v| v + spec.sigma * rng.sample::<f64, _>(StandardNormal));
    }
    let x = observed.slice(s![..len, ..]).to_owned();
    let y = observed.slice(s![1.., ..]).to_owned();
    Ok((attach_truth(x, y, cps, spec.sigma, signals)?, observed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Family;
    use ndarray::array;

    fn pair(beta: f64, delta: f64) -> LvSystem {
        LvSystem {
            alpha: 1.0,
            beta,
            delta,
            gamma: 0.5,
            prey_parents: vec![vec![0]],
            predator_parents: vec![vec![0]],
        }
    }

    #[test]
    fn decoupled_prey_follow_logistic() {
        let sys = pair(0.0, 0.0);
        let mut state = array![0.1, 1.0];
        for _ in 0..100 {
            state = rk4_step(&sys, state.view(), 0.01);
        }
        let logistic = 1.0 / (1.0 + 9.0 * (-1.0f64).exp());
        assert!((state[0] - logistic).abs() < 1e-6, "{}", state[0]);
        assert!((state[1] - (-0.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn classic_pair_oscillation_is_bounded() {
        let sys = pair(0.4, 0.6);
        let mut state = array![0.5, 0.5];
        let mut peak = 0.0f64;
        for t in 0..5000 {
            state = advance(&sys, state.view(), 0.01, 100, t * 100).unwrap();
            peak = peak.max(state[0]).max(state[1]);
        }
        assert!(peak.is_finite() && peak < 100.0, "{peak}");
    }

    fn spec(resample: Resample) -> GeneratorSpec {
        GeneratorSpec {
            p: 5,
            n_change_points: 2,
            gap_range: (50, 80),
            sigma: 0.0,
            seed: 9,
            lotka_volterra: LvParams {
                resample,
                ..Default::default()
            },
            ..GeneratorSpec::new(Family::LotkaVolterra)
        }
    }

    #[test]
    fn states_respect_floor_and_segments_change() {
        for mode in [Resample::Parents, Resample::Rates, Resample::Both] {
            let (data, raw) = gen_lotka_volterra(&spec(mode)).unwrap();
            assert_eq!(data.input_dim(), 10);
            assert!(raw.iter().all(|&v| v >= STATE_FLOOR));
            assert!(data.change_signals().unwrap().iter().all(|&v| v > 0.0), "{mode:?}");
        }
    }

    #[test]
    fn prey_parents_invert_predator_diets() {
        let sys = draw_system(&spec(Resample::Parents), 1);
        for (j, diet) in sys.predator_parents.iter().enumerate() {
            assert_eq!(diet.len(), 2);
            for &i in diet {
                assert!(sys.prey_parents[i].contains(&j));
            }
        }
    }

    #[test]
    fn rate_mode_keeps_parents() {
        let s = spec(Resample::Rates);
        let (a, b) = (draw_system(&s, 0), draw_system(&s, 1));
        assert_eq!(a.prey_parents, b.prey_parents);
        assert_ne!(a.alpha, b.alpha);
        let s = spec(Resample::Parents);
        assert_eq!(draw_system(&s, 0).alpha, draw_system(&s, 1).alpha);
    }

    #[test]
    fn blow_up_names_the_step() {
        let sys = LvSystem {
            alpha: 1e200,
            ..pair(0.0, 0.0)
        };
        let err = advance(&sys, array![0.5, 0.5].view(), 0.01, 10, 40).unwrap_err();
        assert!(matches!(err, Error::Integration { step } if step >= 40));
    }
}
