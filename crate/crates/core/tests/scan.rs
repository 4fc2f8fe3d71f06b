use cpscan::datagen::{generate, Family, GeneratorSpec};
use cpscan::detect::{suggest_threshold, ThresholdMode};
use cpscan::nn::{train_window, TrainConfig};
use cpscan::pipeline::run_detection;
use cpscan::scan::{compute_error_curve, refine_curve, test_error};
use cpscan::{rng, DetectionConfig, SeriesDataset, ThresholdSpec};

fn small_dataset(seed: u64) -> SeriesDataset {
    dataset(seed, 120, 240)
}

fn dataset(seed: u64, cp: usize, len: usize) -> SeriesDataset {
    let mut spec = GeneratorSpec::new(Family::MlpPiecewise);
    spec.p = 5;
    spec.h = 2;
    spec.sigma = 0.3;
    spec.seed = seed;
    spec.change_points = Some(vec![cp]);
    spec.length = Some(len);
    spec.mlp.signal_target = Some(300.0);
    generate(&spec).unwrap().dataset
}

fn small_config(t0: usize) -> DetectionConfig {
    let mut cfg = DetectionConfig::with_t0(t0);
    cfg.hidden = vec![8];
    cfg.train.max_epochs = 150;
    cfg.train.adam.lr = 0.01;
    cfg.seed = 3;
    cfg
}

#[test]
fn curve_values_are_window_errors() {
    let data = small_dataset(1);
    let mut cfg = small_config(20);
    cfg.stride = 7;
    let curve = compute_error_curve(&data, &cfg).unwrap();
    assert_eq!(curve.t_values.first(), Some(&20));
    assert!(*curve.t_values.last().unwrap() <= data.len() - 20);
    let spec = cfg.mlp_spec(data.input_dim(), data.output_dim()).unwrap();
    for (t, e) in curve.points().step_by(5) {
        assert!(e >= 0.0);
        let (xtr, ytr) = data.rows(t - cfg.t1, t);
        let train = TrainConfig {
            seed: rng::derive(cfg.seed, rng::stream::WINDOW, t as u64),
            ..cfg.train.clone()
        };
        let model = train_window(xtr, ytr, &spec, &train).unwrap();
        let (xte, yte) = data.rows(t, t + cfg.t2);
        assert_eq!(e, test_error(&model, xte, yte).unwrap(), "t = {t}");
    }
}

#[test]
fn curve_does_not_depend_on_worker_count() {
    let data = small_dataset(2);
    let mut cfg = small_config(20);
    cfg.stride = 3;
    cfg.workers = 1;
    let serial = compute_error_curve(&data, &cfg).unwrap();
    cfg.workers = 3;
    assert_eq!(serial, compute_error_curve(&data, &cfg).unwrap());
}

#[test]
fn refinement_agrees_with_dense_curve() {
    let data = small_dataset(3);
    let mut cfg = small_config(20);
    let dense = compute_error_curve(&data, &cfg).unwrap();
    cfg.stride = 5;
    let coarse = compute_error_curve(&data, &cfg).unwrap();
    assert_eq!(refine_curve(&data, &cfg, &coarse, &[100], 0).unwrap(), coarse);

    let fine = refine_curve(&data, &cfg, &coarse, &[100, 21], 4).unwrap();
    assert!(fine.len() <= coarse.len() + 2 * 2 * 4);
    for (t, e) in fine.points() {
        assert_eq!(Some(e), dense.value_at(t), "t = {t}");
    }
    for t in 96..=104 {
        assert!(fine.value_at(t).is_some());
    }
    assert_eq!(fine.t_values[0], 20);
}

#[test]
fn single_change_peak_clears_signal_threshold() {
    let mut hits = 0;
    for seed in 0..10 {
        let data = small_dataset(100 + seed);
        let m1 = data.change_signals().unwrap()[0];
        let mut cfg = small_config(20);
        cfg.stride = 2;
        let curve = compute_error_curve(&data, &cfg).unwrap();
        let pi = suggest_threshold(&curve, ThresholdMode::Signal { m1 }).unwrap().value;
        let mut sorted = curve.e_values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if sorted[sorted.len() - 1] - median > pi {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn pipeline_locates_a_strong_change() {
    let data = dataset(4, 250, 500);
    let mut cfg = small_config(40);
    cfg.stride = 4;
    cfg.pi = ThresholdSpec::Signal(None);
    let det = run_detection(&data, &cfg).unwrap();
    assert!(
        det.change_points.iter().any(|t| t.abs_diff(250) <= cfg.t3),
        "{:?}",
        det.change_points
    );
    for w in det.change_points.windows(2) {
        assert!(w[1] - w[0] >= cfg.t3);
    }
    assert!(det.threshold.value > 0.0);
}

#[test]
fn short_series_is_rejected() {
    let data = small_dataset(5);
    let cfg = small_config(200);
    assert!(compute_error_curve(&data, &cfg).is_err());
}

