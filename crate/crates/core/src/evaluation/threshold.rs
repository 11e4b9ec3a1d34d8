use serde::{Deserialize, Serialize};

use super::check_inputs;
use super::curve::confusion;
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiopsyCounts {
    /// p ≥ t.
    pub requested: usize,
    pub avoided: usize,
    /// Malignant lesions with p < t.
    pub missed_cancers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecision {
    pub threshold: f64,
    pub npv: Option<f64>,
    pub ppv: f64,
    pub ppv_floor: f64,
    pub n: usize,
    pub biopsies: BiopsyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ThresholdOutcome {
    Chosen(ThresholdDecision),
    /// No candidate threshold reaches the PPV floor.
    Infeasible { ppv_floor: f64, best_ppv: Option<f64> },
}

impl ThresholdOutcome {
    pub fn decision(&self) -> Option<&ThresholdDecision> {
        match self {
            ThresholdOutcome::Chosen(d) => Some(d),
            ThresholdOutcome::Infeasible { .. } => None,
        }
    }
}

/// {0, 1} ∪ midpoints of consecutive distinct sorted probabilities, ascending.
pub fn candidate_thresholds(probs: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = vec![0.0];
    out.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Among candidate thresholds whose PPV meets `ppv_floor`, pick the one with
/// the highest NPV (an undefined NPV ranks last); ties go to the larger
/// threshold, which requests fewer biopsies.
pub fn optimize_threshold(probs: &[f64], labels: &[Label], ppv_floor: f64) -> Result<ThresholdOutcome> {
    check_inputs(probs, labels)?;
    if !(0.0..=1.0).contains(&ppv_floor) {
        return Err(Error::invalid(format!("PPV floor {ppv_floor} outside [0, 1]")));
    }
    let pos = labels.iter().filter(|l| l.is_malignant()).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    let mut best: Option<(f64, f64, ThresholdDecision)> = None;
    let mut best_ppv: Option<f64> = None;
    for t in candidate_thresholds(probs) {
        let c = confusion(probs, labels, t);
        let Some(ppv) = c.ppv() else { continue };
        best_ppv = Some(best_ppv.map_or(ppv, |b: f64| b.max(ppv)));
        if ppv < ppv_floor {
            continue;
        }
        let npv = c.npv();
        let key = npv.unwrap_or(-1.0);
        let better = match &best {
            None => true,
            Some((bk, bt, _)) => key > *bk || (key == *bk && t > *bt),
        };
        if better {
            let requested = c.tp + c.fp;
            best = Some((
                key,
                t,
                ThresholdDecision {
                    threshold: t,
                    npv,
                    ppv,
                    ppv_floor,
                    n: c.total(),
                    biopsies: BiopsyCounts {
                        requested,
                        avoided: c.total() - requested,
                        missed_cancers: c.fn_,
                    },
                },
            ));
        }
    }
    Ok(match best {
        Some((_, _, d)) => ThresholdOutcome::Chosen(d),
        None => ThresholdOutcome::Infeasible { ppv_floor, best_ppv },
    })
}
