use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, LesionRecord};
use crate::error::{Error, Result};
use crate::model::RiskModel;

/// `1 − p̂(label | x)` given `p̂(Y = 1 | x)`.
pub fn residual(p_malignant: f64, label: Label) -> f64 {
    let p_label = match label {
        Label::Malignant => p_malignant,
        Label::Benign => 1.0 - p_malignant,
    };
    1.0 - p_label
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub record: LesionRecord,
    pub residual: f64,
}

impl ResidualSample {
    pub fn label(&self) -> Label {
        self.record.label.expect("residual samples are labeled")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualRole {
    Full,
    /// Used to grow the partition tree.
    TreeHalf,
    /// Used for the per-leaf quantiles.
    QuantileHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDataset {
    pub samples: Vec<ResidualSample>,
    pub role: ResidualRole,
}

impl ResidualDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.residual).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &LesionRecord> {
        self.samples.iter().map(|s| &s.record)
    }
}

/// Nonconformity of each calibration record under the fitted model.
pub fn compute_residuals(m: &RiskModel, cal: &Dataset) -> Result<ResidualDataset> {
    let samples = cal
        .iter()
        .map(|r| {
            let label = r.label_or_err()?;
            Ok(ResidualSample {
                record: r.clone(),
                residual: residual(m.predict_proba(r), label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualDataset { samples, role: ResidualRole::Full })
}

/// Label-stratified seeded split: ⌊fraction·n⌋ samples go to the tree half.
///
/// Each class contributes ⌊fraction·n_c⌋ samples, and any shortfall is
/// assigned to the classes with the largest fractional remainders (ties to
/// the benign class), so per-class counts are within one of proportional.
pub fn split_residuals(rd: &ResidualDataset, fraction: f64, seed: u64) -> Result<(ResidualDataset, ResidualDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} outside (0, 1)")));
    }
    let n = rd.len();
    let n_tree = (fraction * n as f64).floor() as usize;
    if n < 2 || n_tree == 0 || n_tree == n {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} residuals leaves an empty half"
        )));
    }
    let mut rng = crate::stream_rng(seed, crate::Stream::ResidualSplit);
    let mut by_class: Vec<Vec<usize>> = Label::BOTH
        .iter()
        .map(|l| (0..n).filter(|&i| rd.samples[i].label() == *l).collect())
        .collect();
    for class in &mut by_class {
        class.shuffle(&mut rng);
    }
    let exact: Vec<f64> = by_class.iter().map(|c| fraction * c.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut shortfall = n_tree - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..by_class.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for c in order {
        if shortfall == 0 {
            break;
        }
        if take[c] < by_class[c].len() {
            take[c] += 1;
            shortfall -= 1;
        }
    }
    let mut tree = Vec::with_capacity(n_tree);
    let mut quant = Vec::with_capacity(n - n_tree);
    for (class, k) in by_class.iter().zip(&take) {
        tree.extend(class[..*k].iter().map(|&i| rd.samples[i].clone()));
        quant.extend(class[*k..].iter().map(|&i| rd.samples[i].clone()));
    }
    Ok((
        ResidualDataset { samples: tree, role: ResidualRole::TreeHalf },
        ResidualDataset { samples: quant, role: ResidualRole::QuantileHalf },
    ))
}
