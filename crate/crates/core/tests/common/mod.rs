//! Independent reference implementations shared by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use cpscan::nn::{MlpModel, MlpSpec};
use cpscan::rng;
use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

/// Literal quadratic-time range scan over an arbitrary (ascending) grid.
pub fn naive_detect(times: &[usize], values: &[f64], t3: usize, pi: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < times.len() {
        let t = times[k];
        let lo = t.saturating_sub(t3);
        let hi = t + t3;
        let idx: Vec<usize> = (0..times.len())
            .filter(|&i| times[i] >= lo && times[i] <= hi)
            .collect();
        let mut c = 0.0_f64;
        for &i in &idx {
            for &j in &idx {
                c = c.max((values[i] - values[j]).abs());
            }
        }
        if c >= pi {
            let mut best = idx[0];
            for &i in &idx {
                if values[i] > values[best] {
                    best = i;
                }
            }
            out.push(times[best]);
            let next = t + 3 * t3;
            while k < times.len() && times[k] < next {
                k += 1;
            }
        } else {
            k += 1;
        }
    }
    out
}

pub fn brute_mean_distance(truth: &[usize], est: &[usize]) -> f64 {
    if est.is_empty() {
        return f64::INFINITY;
    }
    let mut total = 0usize;
    for &t in truth {
        let mut best = usize::MAX;
        for &e in est {
            best = best.min(t.abs_diff(e));
        }
        total += best;
    }
    total as f64 / truth.len() as f64
}

/// For each estimate, index (into the sorted truth) of its nearest true point,
/// earlier true point on ties.
fn brute_assign(truth: &[usize], est: &[usize]) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut t = truth.to_vec();
    t.sort_unstable();
    let owner = est
        .iter()
        .map(|&e| {
            let mut best: Option<usize> = None;
            for i in 0..t.len() {
                match best {
                    Some(b) if t[b].abs_diff(e) <= t[i].abs_diff(e) => {}
                    _ => best = Some(i),
                }
            }
            best
        })
        .collect();
    (t, owner)
}

pub fn brute_hausdorff_sum(truth: &[usize], est: &[usize]) -> f64 {
    if est.is_empty() {
        return f64::INFINITY;
    }
    let (t, owner) = brute_assign(truth, est);
    let mut worst = 0.0_f64;
    for i in 0..t.len() {
        let mut s = 0usize;
        for (k, &e) in est.iter().enumerate() {
            if owner[k] == Some(i) {
                s += t[i].abs_diff(e);
            }
        }
        worst = worst.max(s as f64);
    }
    worst
}

pub fn brute_hausdorff_prod(truth: &[usize], est: &[usize]) -> f64 {
    if est.is_empty() {
        return f64::INFINITY;
    }
    let (t, owner) = brute_assign(truth, est);
    let mut worst = 0.0_f64;
    for i in 0..t.len() {
        let mut p = 1.0;
        let mut any = false;
        for (k, &e) in est.iter().enumerate() {
            if owner[k] == Some(i) {
                p *= t[i].abs_diff(e) as f64;
                any = true;
            }
        }
        if any {
            worst = worst.max(p);
        }
    }
    worst
}

/// Repeatedly take the globally closest unused (truth, estimate) pair within
/// the margin.
pub fn brute_true_positives(truth: &[usize], est: &[usize], margin: usize) -> usize {
    let mut t = truth.to_vec();
    let mut e = est.to_vec();
    t.sort_unstable();
    e.sort_unstable();
    let mut t_used = vec![false; t.len()];
    let mut e_used = vec![false; e.len()];
    let mut tp = 0;
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..t.len() {
            for j in 0..e.len() {
                if t_used[i] || e_used[j] {
                    continue;
                }
                let d = t[i].abs_diff(e[j]);
                if d > margin {
                    continue;
                }
                if best.is_none_or(|b| (d, i, j) < b) {
                    best = Some((d, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                t_used[i] = true;
                e_used[j] = true;
                tp += 1;
            }
            None => return tp,
        }
    }
}

/// Random model with widths in `1..=8`, up to three weight layers and
/// nonzero activation biases.
pub fn random_model(seed: u64) -> MlpModel {
    let mut r = rng::rng_from(seed);
    let layers = r.random_range(1..=3usize);
    let widths: Vec<usize> = (0..=layers).map(|_| r.random_range(1..=8usize)).collect();
    let spec = MlpSpec::new(widths.clone()).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let weights = widths
        .windows(2)
        .map(|w| Array2::from_shape_simple_fn((w[1], w[0]), || normal.sample(&mut r)))
        .collect();
    let biases = widths[1..widths.len() - 1]
        .iter()
        .map(|&w| Array1::from_shape_simple_fn(w, || 0.3 * normal.sample(&mut r)))
        .collect();
    MlpModel::from_parts(spec, weights, biases).unwrap()
}

pub fn random_batch(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
    let mut r = rng::rng_from(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut r))
}

/// Largest relative error between analytic and central-difference gradients
/// over coordinates with `|fd| > 1e-8`. The rounding error of the difference
/// quotient itself (a few ulps of the loss, divided by `h`) is discounted.
pub fn gradient_check(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (_, grads) = model.loss_and_gradients(x.view(), y.view()).unwrap();
    let h = 1e-6;
    let loss = |m: &MlpModel| m.loss(x.view(), y.view()).unwrap();
    let rounding = 16.0 * f64::EPSILON * loss(model).abs().max(1.0) / h;
    let rebuild = |w: Vec<Array2<f64>>, b: Vec<Array1<f64>>| {
        MlpModel::from_parts(model.spec().clone(), w, b).unwrap()
    };
    let mut worst = 0.0_f64;
    let mut check = |analytic: f64, plus: MlpModel, minus: MlpModel| {
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        if fd.abs() > 1e-8 {
            let rel = ((analytic - fd).abs() - rounding).max(0.0) / analytic.abs().max(fd.abs());
            worst = worst.max(rel);
        }
    };
    for (l, w) in model.weights().iter().enumerate() {
        for idx in ndarray::indices(w.raw_dim()) {
            let mut wp = model.weights().to_vec();
            let mut wm = model.weights().to_vec();
            wp[l][idx] += h;
            wm[l][idx] -= h;
            check(
                grads.weights[l][idx],
                rebuild(wp, model.biases().to_vec()),
                rebuild(wm, model.biases().to_vec()),
            );
        }
    }
    for (l, b) in model.biases().iter().enumerate() {
        for i in 0..b.len() {
            let mut bp = model.biases().to_vec();
            let mut bm = model.biases().to_vec();
            bp[l][i] += h;
            bm[l][i] -= h;
            check(
                grads.biases[l][i],
                rebuild(model.weights().to_vec(), bp),
                rebuild(model.weights().to_vec(), bm),
            );
        }
    }
    worst
}
