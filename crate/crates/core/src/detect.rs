//! Peak scanning over a criterion curve.

use serde::{Deserialize, Serialize};

use crate::config::{DetectionConfig, Regime};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::scan::ErrorCurve;

/// Detected change points together with the parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub points: Vec<usize>,
    pub t3: usize,
    #[serde(with = "crate::io::extended_f64")]
    pub pi: f64,
}

impl ChangePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// O(1) range argmax/argmin over a fixed slice (smallest index wins ties).
struct RangeExtrema<'a> {
    values: &'a [f64],
    max_table: Vec<Vec<usize>>,
    min_table: Vec<Vec<usize>>,
}

impl<'a> RangeExtrema<'a> {
    fn new(values: &'a [f64]) -> Self {
        let n = values.len();
        let mut max_table = vec![(0..n).collect::<Vec<_>>()];
        let mut min_table = vec![(0..n).collect::<Vec<_>>()];
        let mut span = 1;
        while 2 * span <= n {
            let prev_max = max_table.last().expect("non-empty");
            let prev_min = min_table.last().expect("non-empty");
            let len = n - 2 * span + 1;
            let mut next_max = Vec::with_capacity(len);
            let mut next_min = Vec::with_capacity(len);
            for i in 0..len {
                next_max.push(Self::pick_max(values, prev_max[i], prev_max[i + span]));
                next_min.push(Self::pick_min(values, prev_min[i], prev_min[i + span]));
            }
            max_table.push(next_max);
            min_table.push(next_min);
            span *= 2;
        }
        Self {
            values,
            max_table,
            min_table,
        }
    }

    fn pick_max(values: &[f64], a: usize, b: usize) -> usize {
        // `a < b` always holds for the table construction and queries.
        if values[b] > values[a] {
            b
        } else {
            a
        }
    }

    fn pick_min(values: &[f64], a: usize, b: usize) -> usize {
        if values[b] < values[a] {
            b
        } else {
            a
        }
    }

    fn level(lo: usize, hi: usize) -> usize {
        (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize
    }

    /// Index of the maximum over `lo..=hi`.
    fn argmax(&self, lo: usize, hi: usize) -> usize {
        let k = Self::level(lo, hi);
        let a = self.max_table[k][lo];
        let b = self.max_table[k][hi + 1 - (1 << k)];
        let (a, b) = (a.min(b), a.max(b));
        Self::pick_max(self.values, a, b)
    }

    fn argmin(&self, lo: usize, hi: usize) -> usize {
        let k = Self::level(lo, hi);
        let a = self.min_table[k][lo];
        let b = self.min_table[k][hi + 1 - (1 << k)];
        let (a, b) = (a.min(b), a.max(b));
        Self::pick_min(self.values, a, b)
    }
}

/// Curve indices covering times `[t − half, t + half]`.
fn window_bounds(times: &[usize], t: usize, half: usize) -> (usize, usize) {
    let lo = times.partition_point(|&s| s < t.saturating_sub(half));
    let hi = times.partition_point(|&s| s <= t.saturating_add(half));
    (lo, hi - 1)
}

/// Thresholded range scan.
///
/// Walks the curve in ascending `t`. At each point the range `max − min` of
/// `E` over `[t − T3, t + T3]` is compared with `pi`; on a hit the argmax of
/// that window is recorded and the scan resumes at the first point at or
/// after `t + 3·T3`.
pub fn detect(curve: &ErrorCurve, t3: usize, pi: f64) -> Result<ChangePointSet> {
    if pi.is_nan() || pi < 0.0 {
        return Err(Error::config(format!("threshold must be >= 0, got {pi}")));
    }
    if t3 == 0 {
        return Err(Error::config("detection window T3 must be >= 1"));
    }
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let times = &curve.t_values;
    let values = &curve.e_values;
    let table = RangeExtrema::new(values);
    let mut points = Vec::new();
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let (lo, hi) = window_bounds(times, t, t3);
        let top = table.argmax(lo, hi);
        let range = values[top] - values[table.argmin(lo, hi)];
        if range >= pi {
            points.push(times[top]);
            let resume = t + 3 * t3;
            i = times.partition_point(|&s| s < resume);
        } else {
            i += 1;
        }
    }
    Ok(ChangePointSet { points, t3, pi })
}

/// Global argmax of the curve (smallest `t` on ties).
pub fn detect_single(curve: &ErrorCurve) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (t, e) in curve.points() {
        if best.is_none_or(|(_, b)| e > b) {
            best = Some((t, e));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::EmptyCurve)
}

/// Move each detection to the highest curve point in `[τ̂, τ̂ + T3]`.
///
/// The scan fires as soon as the rising flank of a peak clears the
/// threshold, so the recorded argmax can sit on that flank. Everything left
/// of `τ̂` inside the triggering window is already no higher than `E(τ̂)`.
pub fn localize(curve: &ErrorCurve, points: &[usize], t3: usize) -> Vec<usize> {
    let times = &curve.t_values;
    let mut out: Vec<usize> = Vec::with_capacity(points.len());
    for &p in points {
        let lo = times.partition_point(|&s| s < p);
        let hi = times.partition_point(|&s| s <= p.saturating_add(t3));
        let mut best = p;
        let mut best_e = curve.value_at(p).unwrap_or(f64::NEG_INFINITY);
        for k in lo..hi {
            if curve.e_values[k] > best_e {
                best = times[k];
                best_e = curve.e_values[k];
            }
        }
        if out.last().is_none_or(|&last| best > last) {
            out.push(best);
        }
    }
    out
}

/// Suggested `(T1, T2, T3)` for a series length and regime.
pub fn suggest_windows(t_sum: usize, regime: Regime) -> Result<(usize, usize, usize)> {
    suggest_windows_with(t_sum, regime, SUBGAUSSIAN_KAPPA)
}

/// Default multiplier of `ln T_sum` in the subgaussian regime.
pub const SUBGAUSSIAN_KAPPA: f64 = 8.0;

pub fn suggest_windows_with(
    t_sum: usize,
    regime: Regime,
    kappa: f64,
) -> Result<(usize, usize, usize)> {
    if t_sum < 16 {
        return Err(Error::SeriesTooShort {
            len: t_sum,
            required: 16,
        });
    }
    let n = t_sum as f64;
    let t0 = match regime {
        Regime::Independent | Regime::Dependent => n.sqrt().round() as usize,
        Regime::Subgaussian => ((kappa * n.ln()).round() as usize).max(30),
    };
    Ok((t0, t0, 2 * t0))
}

/// Threshold selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// `π = M1* · T2 / 3`.
    Signal { m1: f64 },
    /// `π = (M1*/2 − 2hσ²) · T2`.
    ProofBound { m1: f64, h: usize, sigma: f64 },
    /// `median(c) + 3·IQR(c)` over local ranges `c` of windows `[t − T3, t + T3]`.
    Auto { t3: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    #[serde(with = "crate::io::extended_f64")]
    pub value: f64,
    /// Set when the curve carries no information (all values equal); the
    /// value is then `+∞` and nothing can be detected.
    pub degenerate: bool,
}

pub fn suggest_threshold(curve: &ErrorCurve, mode: ThresholdMode) -> Result<ThresholdChoice> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let t2 = curve.t2 as f64;
    let value = match mode {
        ThresholdMode::Signal { m1 } => m1 * t2 / 3.0,
        ThresholdMode::ProofBound { m1, h, sigma } => {
            (m1 / 2.0 - 2.0 * h as f64 * sigma * sigma) * t2
        }
        ThresholdMode::Auto { t3 } => {
            let ranges = local_ranges(curve, t3);
            let max = ranges.iter().copied().fold(0.0_f64, f64::max);
            if max == 0.0 {
                return Ok(ThresholdChoice {
                    value: f64::INFINITY,
                    degenerate: true,
                });
            }
            let mut sorted = ranges;
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            quantile_sorted(&sorted, 0.5) + 3.0 * (q3 - q1)
        }
    };
    if !value.is_finite() || value < 0.0 {
        return Err(Error::config(format!(
            "threshold rule produced an unusable value {value}"
        )));
    }
    Ok(ThresholdChoice {
        value,
        degenerate: false,
    })
}

/// Range `max − min` of `E` over the window around every curve point.
pub fn local_ranges(curve: &ErrorCurve, t3: usize) -> Vec<f64> {
    let table = RangeExtrema::new(&curve.e_values);
    curve
        .t_values
        .iter()
        .map(|&t| {
            let (lo, hi) = window_bounds(&curve.t_values, t, t3);
            curve.e_values[table.argmax(lo, hi)] - curve.e_values[table.argmin(lo, hi)]
        })
        .collect()
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Diagnostics against the signal and spacing requirements of the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub change_points: usize,
    /// Smallest distance between consecutive change points, counting the
    /// series boundaries `0` and `T_sum`.
    pub min_spacing: Option<usize>,
    pub signals: Option<Vec<f64>>,
    pub min_signal: Option<f64>,
    /// `4hσ²`, the level the minimum signal must exceed.
    pub noise_floor: Option<f64>,
    /// `M1* > 4hσ²`.
    pub signal_ok: Option<bool>,
    /// `T ≥ C0·√T_sum / M1*`.
    pub spacing_ok: Option<bool>,
    /// Every change point is reachable by the curve and no two share a
    /// detection window.
    pub window_ok: Option<bool>,
    pub c0: f64,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    /// False if any evaluated check failed.
    pub fn passed(&self) -> bool {
        [self.signal_ok, self.spacing_ok, self.window_ok]
            .iter()
            .all(|c| c.unwrap_or(true))
    }
}

pub fn validate_assumptions(
    data: &SeriesDataset,
    cfg: &DetectionConfig,
    c0: f64,
) -> AssumptionReport {
    let mut notes = Vec::new();
    let t_sum = data.len();
    let h = data.output_dim();
    let noise_floor = data.noise_sigma().map(|s| 4.0 * h as f64 * s * s);

    let Some(cps) = data.change_points() else {
        notes.push("no ground truth: spacing and signal checks skipped".into());
        return AssumptionReport {
            change_points: 0,
            min_spacing: None,
            signals: None,
            min_signal: None,
            noise_floor,
            signal_ok: None,
            spacing_ok: None,
            window_ok: None,
            c0,
            notes,
        };
    };

    if cps.is_empty() {
        notes.push("no change points: checks hold vacuously".into());
        return AssumptionReport {
            change_points: 0,
            min_spacing: Some(t_sum),
            signals: Some(Vec::new()),
            min_signal: None,
            noise_floor,
            signal_ok: Some(true),
            spacing_ok: Some(true),
            window_ok: Some(true),
            c0,
            notes,
        };
    }

    let mut bounds = Vec::with_capacity(cps.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cps);
    bounds.push(t_sum);
    let min_spacing = bounds.windows(2).map(|w| w[1] - w[0]).min();
    let interior = cps.windows(2).map(|w| w[1] - w[0]).min();

    let detect_span = cfg.t1.max(cfg.t2).max(cfg.t3);
    let reachable = cps[0] >= cfg.t1 && cps[cps.len() - 1] + cfg.t2 <= t_sum;
    let separated = interior.is_none_or(|gap| gap >= detect_span);
    if !reachable {
        notes.push(format!(
            "a change point lies outside the curve domain [{}, {}]",
            cfg.t1,
            t_sum.saturating_sub(cfg.t2)
        ));
    }
    if !separated {
        notes.push(format!(
            "change points closer than the detection span {detect_span}"
        ));
    }

    let signals = data.change_signals().map(<[f64]>::to_vec);
    let min_signal = signals
        .as_ref()
        .and_then(|s| s.iter().copied().min_by(f64::total_cmp));
    let signal_ok = match (min_signal, noise_floor) {
        (Some(m), Some(floor)) => Some(m > floor),
        _ => {
            notes.push("signal check needs change signals and noise sigma".into());
            None
        }
    };
    let spacing_ok = match (min_signal, min_spacing) {
        (Some(m), Some(gap)) if m > 0.0 => Some(gap as f64 >= c0 * (t_sum as f64).sqrt() / m),
        (Some(_), Some(_)) => Some(false),
        _ => None,
    };

    AssumptionReport {
        change_points: cps.len(),
        min_spacing,
        signals,
        min_signal,
        noise_floor,
        signal_ok,
        spacing_ok,
        window_ok: Some(reachable && separated),
        c0,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn curve(values: Vec<f64>) -> ErrorCurve {
        let times = (0..values.len()).collect();
        ErrorCurve::new(times, values, 1, 1, 1).unwrap()
    }

    #[test]
    fn constant_curve_has_no_detections() {
        let c = curve(vec![2.0; 50]);
        assert!(detect(&c, 5, 0.1).unwrap().is_empty());
    }

    #[test]
    fn single_spike_hand_trace() {
        let mut e = vec![1.0; 101];
        e[50] = 10.0;
        let c = curve(e);
        let set = detect(&c, 15, 4.0).unwrap();
        assert_eq!(set.points, vec![50]);
        assert_eq!((set.t3, set.pi), (15, 4.0));
    }

    #[test]
    fn detect_rejects_bad_inputs() {
        let c = curve(vec![1.0, 2.0]);
        assert!(matches!(detect(&c, 1, -1.0), Err(Error::Config(_))));
        let empty = ErrorCurve::new(vec![], vec![], 1, 1, 1).unwrap();
        assert!(matches!(detect(&empty, 1, 1.0), Err(Error::EmptyCurve)));
    }

    #[test]
    fn single_argmax_rules() {
        assert_eq!(detect_single(&curve(vec![1.0, 2.0, 3.0, 4.0])).unwrap(), 3);
        assert_eq!(detect_single(&curve(vec![5.0])).unwrap(), 0);
        assert_eq!(detect_single(&curve(vec![1.0, 3.0, 3.0, 0.0])).unwrap(), 1);
        let empty = ErrorCurve::new(vec![], vec![], 1, 1, 1).unwrap();
        assert!(detect_single(&empty).is_err());
    }

    #[test]
    fn localize_moves_to_peak_top() {
        // Rising flank 0..=20 then falling.
        let e: Vec<f64> = (0..41).map(|i| 20.0 - (i as f64 - 20.0).abs()).collect();
        let c = curve(e);
        assert_eq!(localize(&c, &[12], 10), vec![20]);
        assert_eq!(localize(&c, &[5], 10), vec![15]);
        assert_eq!(localize(&c, &[25], 10), vec![25]);
    }

    #[test]
    fn suggested_windows() {
        assert_eq!(suggest_windows(1000, Regime::Independent).unwrap(), (32, 32, 64));
        assert_eq!(suggest_windows(1138, Regime::Independent).unwrap(), (34, 34, 68));
        assert_eq!(suggest_windows(2216, Regime::Independent).unwrap(), (47, 47, 94));
        assert_eq!(suggest_windows(2216, Regime::Dependent).unwrap(), (47, 47, 94));
        // 8 · ln(1000) ≈ 55.3
        assert_eq!(suggest_windows(1000, Regime::Subgaussian).unwrap(), (55, 55, 110));
        assert_eq!(suggest_windows(20, Regime::Subgaussian).unwrap(), (30, 30, 60));
        assert!(suggest_windows(15, Regime::Independent).is_err());
    }

    #[test]
    fn signal_threshold_scaling() {
        let c = ErrorCurve::new(vec![1, 2], vec![1.0, 2.0], 32, 32, 1).unwrap();
        let pi = suggest_threshold(&c, ThresholdMode::Signal { m1: 50.0 }).unwrap();
        assert!((pi.value - 533.333_333_333_333_3).abs() < 1e-9);
        let proof = suggest_threshold(
            &c,
            ThresholdMode::ProofBound {
                m1: 50.0,
                h: 1,
                sigma: 0.5,
            },
        )
        .unwrap();
        assert!((proof.value - (25.0 - 0.5) * 32.0).abs() < 1e-9);
    }

    #[test]
    fn auto_threshold_on_constant_curve_is_infinite() {
        let c = curve(vec![3.0; 30]);
        let pi = suggest_threshold(&c, ThresholdMode::Auto { t3: 4 }).unwrap();
        assert!(pi.degenerate);
        assert_eq!(pi.value, f64::INFINITY);
        assert!(detect(&c, 4, pi.value).unwrap().is_empty());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    fn toy_dataset(cps: Vec<usize>, t_sum: usize, sigma: f64, signals: Vec<f64>) -> SeriesDataset {
        SeriesDataset::new(Array2::ones((t_sum, 1)), Array2::zeros((t_sum, 1)))
            .unwrap()
            .with_change_points(cps)
            .unwrap()
            .with_noise_sigma(sigma)
            .unwrap()
            .with_change_signals(signals)
            .unwrap()
    }

    #[test]
    fn assumptions_on_mean_shift_toy() {
        let data = toy_dataset(vec![500], 1000, 0.4, vec![1.0]);
        let report = validate_assumptions(&data, &DetectionConfig::with_t0(100), 1.0);
        assert!((report.noise_floor.unwrap() - 0.64).abs() < 1e-12);
        assert_eq!(report.signal_ok, Some(true));
        assert_eq!(report.min_spacing, Some(500));
        assert!(report.passed());
    }

    #[test]
    fn close_change_points_fail_window_check() {
        let data = toy_dataset(vec![400, 410], 1000, 0.1, vec![1.0, 1.0]);
        let report = validate_assumptions(&data, &DetectionConfig::with_t0(32), 1.0);
        assert_eq!(report.window_ok, Some(false));
        assert!(!report.passed());
    }

    #[test]
    fn no_change_points_pass_vacuously() {
        let data = toy_dataset(vec![], 300, 0.1, vec![]);
        let report = validate_assumptions(&data, &DetectionConfig::with_t0(32), 1.0);
        assert_eq!(report.signal_ok, Some(true));
        assert_eq!(report.spacing_ok, Some(true));
        assert_eq!(report.window_ok, Some(true));
    }

    #[test]
    fn missing_truth_gives_partial_report() {
        let data = SeriesDataset::new(Array2::ones((50, 1)), Array2::zeros((50, 1))).unwrap();
        let report = validate_assumptions(&data, &DetectionConfig::with_t0(5), 1.0);
        assert_eq!(report.signal_ok, None);
        assert!(!report.notes.is_empty());
    }
}
