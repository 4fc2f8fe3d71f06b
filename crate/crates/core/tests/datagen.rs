use cpscan::datagen::{
    companion, generate, model_set, rk4_step, spectral_radius, Family, GeneratorSpec, LvSystem,
};
use ndarray::{array, s, Array1};

fn spec(family: Family, seed: u64) -> GeneratorSpec {
    let mut spec = GeneratorSpec::new(family);
    spec.seed = seed;
    spec
}

#[test]
fn mlp_piecewise_table_scale_layout() {
    let mut g = spec(Family::MlpPiecewise, 9);
    g.p = 40;
    g.h = 20;
    g.n_change_points = 5;
    g.sigma = 0.4;
    let data = generate(&g).unwrap().dataset;
    assert_eq!((data.input_dim(), data.output_dim()), (40, 20));
    let cps = data.change_points().unwrap();
    assert_eq!(cps.len(), 5);
    let mut prev = 0;
    for &c in cps.iter().chain(std::iter::once(&data.len())) {
        assert!((300..=600).contains(&(c - prev)), "{cps:?}");
        prev = c;
    }
    assert_eq!(data.noise_sigma(), Some(0.4));
    let signals = data.change_signals().unwrap();
    assert_eq!(signals.len(), 5);
    assert!(signals.iter().all(|s| *s > 0.0));
}

#[test]
fn generation_is_deterministic_per_seed() {
    for family in [
        Family::MlpPiecewise,
        Family::Var,
        Family::NonlinearVar,
        Family::LotkaVolterra,
        Family::MeanShift,
    ] {
        let mut g = spec(family, 4);
        g.p = 3;
        g.h = 3;
        g.n_change_points = 2;
        g.gap_range = (60, 90);
        g.sigma = 0.1;
        let a = generate(&g).unwrap();
        assert_eq!(a, generate(&g).unwrap(), "{family}");
        g.seed = 5;
        assert_ne!(a.dataset, generate(&g).unwrap().dataset, "{family}");
    }
}

#[test]
fn noiseless_rows_follow_their_segment_model() {
    let mut g = spec(Family::MlpPiecewise, 2);
    g.p = 6;
    g.h = 3;
    g.n_change_points = 3;
    g.gap_range = (50, 80);
    let data = generate(&g).unwrap().dataset;
    let models = model_set(&g).unwrap();
    let cps = data.change_points().unwrap().to_vec();
    let mut bounds = vec![0];
    bounds.extend(&cps);
    bounds.push(data.len());
    for j in 0..=cps.len() {
        let (x, y) = data.rows(bounds[j], bounds[j + 1]);
        assert_eq!(models.eval(j, x), y.to_owned(), "segment {j}");
        if j > 0 {
            assert_ne!(models.eval(j - 1, x), y.to_owned());
        }
    }
}

#[test]
fn var_flattening_and_stability() {
    let mut g = spec(Family::Var, 3);
    g.h = 5;
    g.n_change_points = 2;
    g.gap_range = (100, 150);
    g.var.lags = 4;
    let gen = generate(&g).unwrap();
    assert_eq!(gen.lags, Some(4));
    assert_eq!(gen.dataset.input_dim(), 20);
    assert_eq!(gen.dataset.output_dim(), 5);
    assert_eq!(gen.raw.as_ref().unwrap().nrows(), gen.dataset.len() + 4);
    // Inputs of row i are the four preceding raw values, newest first.
    let raw = gen.raw.unwrap();
    let x = gen.dataset.x();
    for lag in 1..=4 {
        assert_eq!(x.slice(s![10, (lag - 1) * 5..lag * 5]), raw.row(10 + 4 - lag));
    }
    assert_eq!(gen.dataset.y().row(10), raw.row(14));
}

#[test]
fn companion_of_scalar_ar2() {
    // y_t = 0.5 y_{t-1} + 0.3 y_{t-2}: roots of z² − 0.5z − 0.3.
    let c = companion(&[array![[0.5]], array![[0.3]]]);
    assert_eq!(c, array![[0.5, 0.3], [1.0, 0.0]]);
    let expected = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
    assert!((spectral_radius(&c) - expected).abs() < 1e-12);
}

#[test]
fn lotka_volterra_decoupled_closed_forms() {
    let sys = LvSystem {
        alpha: 1.0,
        beta: 0.4,
        delta: 0.6,
        gamma: 0.5,
        prey_parents: vec![vec![]],
        predator_parents: vec![vec![]],
    };
    let mut state = array![0.1, 2.0];
    let dt = 1e-3;
    for _ in 0..1000 {
        state = rk4_step(&sys, state.view(), dt);
    }
    let logistic = 1.0 / (1.0 + 9.0 * (-1.0f64).exp());
    assert!((state[0] - logistic).abs() < 1e-6);
    assert!((state[1] - 2.0 * (-0.5f64).exp()).abs() < 1e-6);
}

#[test]
fn lotka_volterra_output_is_positive() {
    let mut g = spec(Family::LotkaVolterra, 6);
    g.p = 4;
    g.n_change_points = 2;
    g.gap_range = (80, 120);
    let gen = generate(&g).unwrap();
    assert_eq!(gen.dataset.output_dim(), 8);
    assert!(gen.raw.unwrap().iter().all(|v| *v > 0.0 && v.is_finite()));
}

#[test]
fn mean_shift_levels() {
    let mut g = spec(Family::MeanShift, 0);
    g.change_points = Some(vec![500]);
    g.length = Some(1000);
    let data = generate(&g).unwrap().dataset;
    let y = data.y();
    let first: Array1<f64> = y.slice(s![..500, 0]).to_owned();
    let second: Array1<f64> = y.slice(s![500.., 0]).to_owned();
    assert!(first.iter().all(|v| *v == 1.0));
    assert!(second.iter().all(|v| *v == 2.0));
    assert_eq!(data.change_signals(), Some(&[1.0][..]));
}

#[test]
fn invalid_specs_fail() {
    let mut g = spec(Family::MlpPiecewise, 0);
    g.gap_range = (10, 5);
    assert!(generate(&g).is_err());
    let mut g = spec(Family::MlpPiecewise, 0);
    g.change_points = Some(vec![5]);
    assert!(generate(&g).is_err());
    let mut g = spec(Family::MlpPiecewise, 0);
    g.sigma = -1.0;
    assert!(generate(&g).is_err());
}
