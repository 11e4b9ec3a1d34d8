//! Classification and calibration metrics over probability outputs,
//! NPV-maximizing threshold selection, and biopsy accounting.
//!
//! A case is predicted positive when its probability is at or above the
//! threshold. Ratios with an empty denominator are reported as absent.

mod calibration;
mod curve;
mod scalar;
mod threshold;

pub use calibration::{calibration_curve, CalibrationBin, CalibrationCurve};
pub use curve::{confusion, default_grid, threshold_curve, Confusion, ThresholdCurve, ThresholdPoint};
pub use scalar::{auprc, auroc, log_loss, scalar_metrics, ScalarMetrics, LOG_LOSS_EPS};
pub use threshold::{candidate_thresholds, optimize_threshold, BiopsyCounts, ThresholdDecision, ThresholdOutcome};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub(crate) fn check_inputs(probs: &[f64], labels: &[Label]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: probs.len(), right: labels.len() });
    }
    if probs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
