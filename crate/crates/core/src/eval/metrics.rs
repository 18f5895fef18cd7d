//! Detection metrics: malware-class precision/recall/F1 and the
//! trapezoidal area-under-time aggregate.

use crate::env::Label;
use crate::error::{Error, Result};

/// Malware-class confusion counts and the derived rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision/recall/F1 with malware as the positive class.
///
/// Returns `Ok(None)` when the metric is undefined: an empty input, or a
/// bucket with no malware present and none predicted (no true positives,
/// false positives, or false negatives to score). Zero precision+recall on
/// a defined bucket yields F1 = 0, not a marker. Rejected samples must be
/// excluded before calling — predictions are class labels by construction.
pub fn prf(predictions: &[Label], labels: &[Label]) -> Result<Option<Prf>> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "prf needs matching lengths, got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (p, y) in predictions.iter().zip(labels) {
        match (p.is_malware(), y.is_malware()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(None);
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Some(Prf {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        precision,
        recall,
        f1,
    }))
}

/// Malware-class F1 alone; same undefined-marker semantics as [`prf`].
pub fn f1(predictions: &[Label], labels: &[Label]) -> Result<Option<f64>> {
    Ok(prf(predictions, labels)?.map(|m| m.f1))
}

/// Area under time: the trapezoidal mean of a per-period metric,
/// `(1/(N−1))·Σ (P_k + P_{k+1})/2`.
///
/// A constant series returns the constant exactly (short-circuited, no
/// accumulated rounding). Fewer than two points is a contract violation,
/// as is any non-finite value.
pub fn aut(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Contract(format!(
            "area under time needs at least two periods, got {}",
            series.len()
        )));
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::Contract(format!(
            "area under time requires finite values, got {bad}"
        )));
    }
    if series.iter().all(|v| *v == series[0]) {
        return Ok(series[0]);
    }
    let n = series.len();
    let sum: f64 = series.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum();
    Ok(sum / (n - 1) as f64)
}

/// Area under time over a series with undefined months: undefined entries
/// are skipped and the remaining points treated as adjacent. Returns
/// `Ok(None)` when fewer than two defined points remain.
pub fn aut_defined(series: &[Option<f64>]) -> Result<Option<f64>> {
    let defined: Vec<f64> = series.iter().filter_map(|v| *v).collect();
    if defined.len() < 2 {
        return Ok(None);
    }
    aut(&defined).map(Some)
}
