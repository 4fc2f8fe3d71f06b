//! Curve, threshold, scan and refinement as one call.

use serde::{Deserialize, Serialize};

use crate::config::{DetectionConfig, ThresholdSpec};
use crate::data::SeriesDataset;
use crate::detect::{
    detect, localize, suggest_threshold, validate_assumptions, AssumptionReport, ThresholdChoice,
    ThresholdMode,
};
use crate::error::{Error, Result};
use crate::io::{extended_f64, FileRef};
use crate::scan::{compute_error_curve, refine_curve, ErrorCurve};

/// Everything produced by one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Final curve (refined near detections when the stride is coarse).
    pub curve: ErrorCurve,
    pub threshold: ThresholdChoice,
    /// Points recorded by the literal scan on the coarse curve.
    pub scan_points: Vec<usize>,
    pub change_points: Vec<usize>,
}

/// Minimum recorded change signal of a generated dataset.
fn recorded_m1(data: &SeriesDataset) -> Result<f64> {
    data.change_signals()
        .and_then(|s| s.iter().copied().reduce(f64::min))
        .ok_or_else(|| {
            Error::config("threshold needs M1*: pass it explicitly or use a dataset with recorded change signals")
        })
}

pub fn resolve_threshold(
    curve: &ErrorCurve,
    cfg: &DetectionConfig,
    data: &SeriesDataset,
) -> Result<ThresholdChoice> {
    let mode = match cfg.pi {
        ThresholdSpec::Value(value) => {
            return Ok(ThresholdChoice {
                value,
                degenerate: false,
            })
        }
        ThresholdSpec::Auto => ThresholdMode::Auto { t3: cfg.t3 },
        ThresholdSpec::Signal(m1) => ThresholdMode::Signal {
            m1: m1.map_or_else(|| recorded_m1(data), Ok)?,
        },
        ThresholdSpec::ProofBound(m1) => ThresholdMode::ProofBound {
            m1: m1.map_or_else(|| recorded_m1(data), Ok)?,
            h: data.output_dim(),
            sigma: data
                .noise_sigma()
                .ok_or_else(|| Error::config("proof-bound threshold needs the noise level"))?,
        },
    };
    suggest_threshold(curve, mode)
}

/// Highest curve point within `[c − r, c + r]` for each center, kept
/// strictly increasing.
fn peak_near(curve: &ErrorCurve, centers: &[usize], radius: usize) -> Vec<usize> {
    let times = &curve.t_values;
    let mut out: Vec<usize> = Vec::with_capacity(centers.len());
    for &c in centers {
        let lo = times.partition_point(|&s| s < c.saturating_sub(radius));
        let hi = times.partition_point(|&s| s <= c + radius);
        let best = (lo..hi)
            .fold(None::<usize>, |b, k| match b {
                Some(j) if curve.e_values[j] >= curve.e_values[k] => Some(j),
                _ => Some(k),
            })
            .map_or(c, |k| times[k]);
        if out.last().is_none_or(|&last| best > last) {
            out.push(best);
        }
    }
    out
}

/// Run the full detector on `data`.
pub fn run_detection(data: &SeriesDataset, cfg: &DetectionConfig) -> Result<Detection> {
    let coarse = compute_error_curve(data, cfg)?;
    let threshold = resolve_threshold(&coarse, cfg, data)?;
    let scan_points = detect(&coarse, cfg.t3, threshold.value)?.points;
    let mut points = if cfg.localize {
        localize(&coarse, &scan_points, cfg.t3)
    } else {
        scan_points.clone()
    };
    let radius = cfg.refine_radius();
    let curve = if radius > 0 && !points.is_empty() {
        let fine = refine_curve(data, cfg, &coarse, &points, radius)?;
        points = peak_near(&fine, &points, radius);
        fine
    } else {
        coarse
    };
    Ok(Detection {
        curve,
        threshold,
        scan_points,
        change_points: points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub threshold_rule: String,
    pub degenerate_threshold: bool,
    pub scan_points: Vec<usize>,
    pub assumption_checks: AssumptionReport,
}

/// Serialized detection result. Contains no timings or absolute paths, so
/// identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub change_points: Vec<usize>,
    #[serde(with = "extended_f64")]
    pub pi: f64,
    #[serde(rename = "T1")]
    pub t1: usize,
    #[serde(rename = "T2")]
    pub t2: usize,
    #[serde(rename = "T3")]
    pub t3: usize,
    pub stride: usize,
    pub localize: bool,
    pub training_digest: String,
    pub curve_ref: Option<FileRef>,
    pub diagnostics: Diagnostics,
}

impl DetectionReport {
    pub fn new(
        detection: &Detection,
        data: &SeriesDataset,
        cfg: &DetectionConfig,
        c0: f64,
        curve_ref: Option<FileRef>,
    ) -> Self {
        Self {
            change_points: detection.change_points.clone(),
            pi: detection.threshold.value,
            t1: cfg.t1,
            t2: cfg.t2,
            t3: cfg.t3,
            stride: cfg.stride,
            localize: cfg.localize,
            training_digest: cfg.training_digest(),
            curve_ref,
            diagnostics: Diagnostics {
                threshold_rule: cfg.pi.to_string(),
                degenerate_threshold: detection.threshold.degenerate,
                scan_points: detection.scan_points.clone(),
                assumption_checks: validate_assumptions(data, cfg, c0),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(values: &[f64]) -> ErrorCurve {
        ErrorCurve::new((0..values.len()).collect(), values.to_vec(), 1, 1, 1).unwrap()
    }

    #[test]
    fn peak_near_picks_local_max() {
        let c = curve(&[0.0, 1.0, 5.0, 2.0, 9.0, 1.0]);
        assert_eq!(peak_near(&c, &[1], 1), vec![2]);
        assert_eq!(peak_near(&c, &[2, 3], 2), vec![4]);
        assert_eq!(peak_near(&c, &[0], 0), vec![0]);
    }

    #[test]
    fn explicit_and_signal_thresholds() {
        let data = SeriesDataset::new(ndarray::Array2::ones((4, 1)), ndarray::Array2::zeros((4, 1)))
            .unwrap()
            .with_change_points(vec![2])
            .unwrap()
            .with_change_signals(vec![6.0])
            .unwrap();
        let mut cfg = DetectionConfig::with_windows(1, 3, 1);
        let c = curve(&[1.0, 2.0]);
        cfg.pi = ThresholdSpec::Value(2.5);
        assert_eq!(resolve_threshold(&c, &cfg, &data).unwrap().value, 2.5);
        cfg.pi = ThresholdSpec::Signal(None);
        let c = ErrorCurve::new(vec![0, 1], vec![1.0, 2.0], 1, 3, 1).unwrap();
        assert_eq!(resolve_threshold(&c, &cfg, &data).unwrap().value, 6.0);
        cfg.pi = ThresholdSpec::ProofBound(None);
        assert!(resolve_threshold(&c, &cfg, &data).is_err());
    }
}
