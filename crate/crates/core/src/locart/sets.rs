use serde::{Deserialize, Serialize};

use super::calibrate::Calibration;
use crate::dataset::{Label, LesionRecord};
use crate::error::Result;
use crate::model::RiskModel;
use crate::tree::PartitionTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    /// Ascending; may be empty.
    pub labels: Vec<Label>,
    pub leaf_id: u64,
    pub q: f64,
    /// Probability a label needs to enter the set, 1 − q.
    pub cutoff: f64,
    pub p_malignant: f64,
}

impl PredictionSet {
    pub fn contains(&self, l: Label) -> bool {
        self.labels.contains(&l)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// {ℓ ∈ {0, 1} : p̂(ℓ | x) ≥ 1 − q}.
pub fn labels_for(p_malignant: f64, q: f64) -> Vec<Label> {
    let cutoff = 1.0 - q;
    Label::BOTH
        .into_iter()
        .filter(|&l| {
            let p = match l {
                Label::Malignant => p_malignant,
                Label::Benign => 1.0 - p_malignant,
            };
            p >= cutoff
        })
        .collect()
}

pub fn predict_set(m: &RiskModel, t: &PartitionTree, calib: &Calibration, x: &LesionRecord) -> Result<PredictionSet> {
    let leaf_id = t.assign_leaf(x);
    let q = calib.leaf(leaf_id)?.q;
    let p = m.predict_proba(x);
    Ok(PredictionSet {
        labels: labels_for(p, q),
        leaf_id,
        q,
        cutoff: 1.0 - q,
        p_malignant: p,
    })
}
