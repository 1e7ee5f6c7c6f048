//! Sign-threshold confusion counts and the scores derived from them.
//!
//! A prediction `ŷ > 0` reads as "late", `ŷ <= 0` as "timely"; the same rule
//! classifies the target. Every ratio returns 0 when its denominator is 0,
//! so grid search never has to handle a failing metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {predictions} predictions vs {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("no pairs to evaluate")]
    Empty,
    #[error("y_max must be positive, got {0}")]
    NonPositiveScale(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check(predictions: &[f64], targets: &[f64]) -> Result<(), MetricsError> {
    if predictions.len() != targets.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn confusion(predictions: &[f64], targets: &[f64]) -> Result<ConfusionCounts, MetricsError> {
    check(predictions, targets)?;
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(targets) {
        match (p > 0.0, y > 0.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// F1 of the "late" class: `2TP / (2TP + FP + FN)`.
pub fn f_tp(c: &ConfusionCounts) -> f64 {
    let tp = c.tp as f64;
    ratio(2.0 * tp, 2.0 * tp + c.fp as f64 + c.fn_ as f64)
}

/// F1 of the "timely" class: `2TN / (2TN + FP + FN)`.
pub fn f_tn(c: &ConfusionCounts) -> f64 {
    let tn = c.tn as f64;
    ratio(2.0 * tn, 2.0 * tn + c.fp as f64 + c.fn_ as f64)
}

pub fn ppv(c: &ConfusionCounts) -> f64 {
    ratio(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn tpr(c: &ConfusionCounts) -> f64 {
    ratio(c.tp as f64, (c.tp + c.fn_) as f64)
}

pub fn acc(c: &ConfusionCounts) -> f64 {
    ratio((c.tp + c.tn) as f64, c.total() as f64)
}

pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    ratio(tp * tn - fp * fn_, den)
}

/// Mean absolute error relative to `y_max`: `E = mean(|ŷ - y|) / y_max`.
pub fn mae_normalized(predictions: &[f64], targets: &[f64], y_max: f64) -> Result<f64, MetricsError> {
    check(predictions, targets)?;
    if !(y_max > 0.0) {
        return Err(MetricsError::NonPositiveScale(y_max));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y).abs() / y_max)
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// `G = ((1 - E) + F_tp + F_tn) / 3`. Not clamped: `E > 1` lowers `G`
/// below what the F-scores alone would give.
pub fn g_score(e: f64, f_tp: f64, f_tn: f64) -> f64 {
    ((1.0 - e) + f_tp + f_tn) / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub counts: ConfusionCounts,
    pub f_tp: f64,
    pub f_tn: f64,
    pub ppv: f64,
    pub tpr: f64,
    pub mcc: f64,
    pub acc: f64,
    /// `E`, in units of `y_max`.
    pub mae: f64,
    pub g: f64,
}

/// Every score from a single confusion pass.
pub fn evaluate(predictions: &[f64], targets: &[f64], y_max: f64) -> Result<MetricReport, MetricsError> {
    let counts = confusion(predictions, targets)?;
    let mae = mae_normalized(predictions, targets, y_max)?;
    let (ftp, ftn) = (f_tp(&counts), f_tn(&counts));
    Ok(MetricReport {
        counts,
        f_tp: ftp,
        f_tn: ftn,
        ppv: ppv(&counts),
        tpr: tpr(&counts),
        mcc: mcc(&counts),
        acc: acc(&counts),
        mae,
        g: g_score(mae, ftp, ftn),
    })
}
