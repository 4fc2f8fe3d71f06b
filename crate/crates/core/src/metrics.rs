//! Scoring estimated change points against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All metrics for one (truth, estimate) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean over true points of the distance to the nearest estimate.
    #[serde(with = "crate::io::extended_f64")]
    pub mean_distance: f64,
    /// `|N − N̂|`.
    pub count_diff: usize,
    /// `N̂ == N`.
    pub matched: bool,
    #[serde(with = "crate::io::extended_f64")]
    pub hausdorff_sum: f64,
    #[serde(with = "crate::io::extended_f64")]
    pub hausdorff_prod: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub margin: usize,
    pub n_true: usize,
    pub n_est: usize,
}

fn check_truth(truth: &[usize]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("the true change-point set is empty"));
    }
    Ok(())
}

/// Distance from `t` to the nearest element of the ascending slice `points`,
/// and that element's index (earlier element on ties).
fn nearest(points: &[usize], t: usize) -> (usize, usize) {
    let i = points.partition_point(|&p| p < t);
    let right = points.get(i).map(|&p| (p - t, i));
    // First of any repeated values on the left.
    let left = i
        .checked_sub(1)
        .map(|j| (t - points[j], points.partition_point(|&p| p < points[j])));
    match (left, right) {
        (Some(l), Some(r)) => {
            if l.0 <= r.0 {
                l
            } else {
                r
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => unreachable!("nearest on empty set"),
    }
}

fn sorted(points: &[usize]) -> Vec<usize> {
    let mut v = points.to_vec();
    v.sort_unstable();
    v
}

/// `(1/N) Σ_j min_k |τ_j − τ̂_k|`; `+∞` when there are no estimates.
pub fn mean_cp_distance(truth: &[usize], est: &[usize]) -> Result<f64> {
    check_truth(truth)?;
    if est.is_empty() {
        return Ok(f64::INFINITY);
    }
    let est = sorted(est);
    let total: usize = truth.iter().map(|&t| nearest(&est, t).0).sum();
    Ok(total as f64 / truth.len() as f64)
}

/// Distances of the estimates assigned to each true point, where every
/// estimate goes to its nearest true point.
fn assignments(truth: &[usize], est: &[usize]) -> Vec<Vec<usize>> {
    let truth_sorted = sorted(truth);
    let mut groups = vec![Vec::new(); truth_sorted.len()];
    for &e in est {
        let (d, i) = nearest(&truth_sorted, e);
        groups[i].push(d);
    }
    groups
}

/// Largest per-true-point sum of assigned estimate distances.
pub fn hausdorff_sum(truth: &[usize], est: &[usize]) -> Result<f64> {
    check_truth(truth)?;
    if est.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(assignments(truth, est)
        .iter()
        .map(|g| g.iter().sum::<usize>() as f64)
        .fold(0.0, f64::max))
}

/// Largest per-true-point product of assigned estimate distances. True
/// points without assigned estimates do not contribute.
pub fn hausdorff_prod(truth: &[usize], est: &[usize]) -> Result<f64> {
    check_truth(truth)?;
    if est.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(assignments(truth, est)
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| g.iter().map(|&d| d as f64).product::<f64>())
        .fold(0.0, f64::max))
}

/// Greedy one-to-one matching within `margin`, closest pairs first (ties by
/// true index, then estimate index, both in ascending order of position).
pub fn match_count(truth: &[usize], est: &[usize], margin: usize) -> usize {
    let truth = sorted(truth);
    let est = sorted(est);
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &t) in truth.iter().enumerate() {
        let lo = est.partition_point(|&e| e + margin < t);
        for (j, &e) in est.iter().enumerate().skip(lo) {
            if e > t + margin {
                break;
            }
            pairs.push((t.abs_diff(e), i, j));
        }
    }
    pairs.sort_unstable();
    let mut truth_used = vec![false; truth.len()];
    let mut est_used = vec![false; est.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !truth_used[i] && !est_used[j] {
            truth_used[i] = true;
            est_used[j] = true;
            tp += 1;
        }
    }
    tp
}

/// `(precision, recall, f1)` from the greedy matching.
pub fn precision_recall(truth: &[usize], est: &[usize], margin: usize) -> (f64, f64, f64) {
    let tp = match_count(truth, est, margin) as f64;
    let precision = if est.is_empty() {
        if truth.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        tp / est.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        tp / truth.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

pub fn evaluate(truth: &[usize], est: &[usize], margin: usize) -> Result<EvalReport> {
    let (precision, recall, f1) = precision_recall(truth, est, margin);
    Ok(EvalReport {
        mean_distance: mean_cp_distance(truth, est)?,
        count_diff: truth.len().abs_diff(est.len()),
        matched: truth.len() == est.len(),
        hausdorff_sum: hausdorff_sum(truth, est)?,
        hausdorff_prod: hausdorff_prod(truth, est)?,
        precision,
        recall,
        f1,
        margin,
        n_true: truth.len(),
        n_est: est.len(),
    })
}

/// Means over repetitions. Infinite distances are counted, not averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub runs: usize,
    pub mean_distance: Option<f64>,
    pub infinite_distance_runs: usize,
    /// Mean distance over runs with `N̂ = N`.
    pub mean_distance_matched: Option<f64>,
    pub mean_count_diff: f64,
    pub prop_matched: f64,
    pub mean_hausdorff_sum: Option<f64>,
    pub infinite_hausdorff_sum_runs: usize,
    pub mean_hausdorff_prod: Option<f64>,
    pub infinite_hausdorff_prod_runs: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> (Option<f64>, usize) {
    let (mut sum, mut n, mut inf) = (0.0, 0usize, 0usize);
    for v in values {
        if v.is_finite() {
            sum += v;
            n += 1;
        } else {
            inf += 1;
        }
    }
    ((n > 0).then(|| sum / n as f64), inf)
}

pub fn aggregate(reports: &[EvalReport]) -> Result<EvalSummary> {
    if reports.is_empty() {
        return Err(Error::UndefinedMetric("no reports to aggregate"));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let (mean_distance, infinite_distance_runs) =
        finite_mean(reports.iter().map(|r| r.mean_distance));
    let (mean_distance_matched, _) = finite_mean(
        reports
            .iter()
            .filter(|r| r.matched)
            .map(|r| r.mean_distance),
    );
    let (mean_hausdorff_sum, infinite_hausdorff_sum_runs) =
        finite_mean(reports.iter().map(|r| r.hausdorff_sum));
    let (mean_hausdorff_prod, infinite_hausdorff_prod_runs) =
        finite_mean(reports.iter().map(|r| r.hausdorff_prod));
    Ok(EvalSummary {
        runs: reports.len(),
        mean_distance,
        infinite_distance_runs,
        mean_distance_matched,
        mean_count_diff: mean(|r| r.count_diff as f64),
        prop_matched: reports.iter().filter(|r| r.matched).count() as f64 / n,
        mean_hausdorff_sum,
        infinite_hausdorff_sum_runs,
        mean_hausdorff_prod,
        infinite_hausdorff_prod_runs,
        mean_precision: mean(|r| r.precision),
        mean_recall: mean(|r| r.recall),
        mean_f1: mean(|r| r.f1),
    })
}
