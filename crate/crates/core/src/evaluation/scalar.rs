use serde::{Deserialize, Serialize};

use super::check_inputs;
use crate::dataset::Label;
use crate::error::{Error, Result};

/// Probabilities are clipped to [ε, 1 − ε] before taking logs.
pub const LOG_LOSS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub auroc: f64,
    pub auprc: f64,
    pub log_loss: f64,
}

pub fn log_loss(probs: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(probs, labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, l)| {
            let p = p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
            if l.is_malignant() {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

fn require_both_classes(labels: &[Label]) -> Result<usize> {
    let pos = labels.iter().filter(|l| l.is_malignant()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(pos)
}

/// Indices sorted by descending score.
fn by_score_desc(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    idx
}

/// P(score₊ > score₋) + ½·P(tie) over all positive–negative pairs,
/// computed in O(n log n) from tied score groups.
pub fn auroc(probs: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(probs, labels)?;
    let pos = require_both_classes(labels)?;
    let neg = labels.len() - pos;
    let order = by_score_desc(probs);
    // negatives with strictly lower score than a group = neg − seen − group
    let mut neg_seen = 0usize;
    let mut wins = 0usize;
    let mut ties = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut gp, mut gn) = (0usize, 0usize);
        while j < order.len() && probs[order[j]] == probs[order[i]] {
            if labels[order[j]].is_malignant() {
                gp += 1;
            } else {
                gn += 1;
            }
            j += 1;
        }
        wins += gp * (neg - neg_seen - gn);
        ties += gp * gn;
        neg_seen += gn;
        i = j;
    }
    Ok((wins as f64 + 0.5 * ties as f64) / (pos as f64 * neg as f64))
}

/// Average precision: Σ (Rₖ − Rₖ₋₁)·Pₖ over distinct descending thresholds.
pub fn auprc(probs: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(probs, labels)?;
    let pos = require_both_classes(labels)? as f64;
    let order = by_score_desc(probs);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && probs[order[j]] == probs[order[i]] {
            if labels[order[j]].is_malignant() {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / pos;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

pub fn scalar_metrics(probs: &[f64], labels: &[Label]) -> Result<ScalarMetrics> {
    Ok(ScalarMetrics {
        auroc: auroc(probs, labels)?,
        auprc: auprc(probs, labels)?,
        log_loss: log_loss(probs, labels)?,
    })
}
