use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::partition::PartitionTree;
use crate::dataset::{Birads, Dataset};
use crate::error::{Error, Result};
use crate::locart::residual;
use crate::model::RiskModel;

/// Descriptive statistics of one subgroup on a labeled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafProfile {
    pub leaf_id: u64,
    pub count: usize,
    /// Count per BI-RADS category, every category present.
    pub birads: BTreeMap<Birads, usize>,
    pub malignancy_rate: f64,
    /// Risk-model accuracy at threshold 0.5.
    pub accuracy: f64,
    pub mean_residual: f64,
}

/// One profile per leaf that receives at least one record, by leaf id.
pub fn leaf_profiles(t: &PartitionTree, ds: &Dataset, m: &RiskModel) -> Result<Vec<LeafProfile>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    #[derive(Default)]
    struct Acc {
        count: usize,
        birads: BTreeMap<Birads, usize>,
        malignant: usize,
        correct: usize,
        residual_sum: f64,
    }
    let mut by_leaf: BTreeMap<u64, Acc> = BTreeMap::new();
    for r in ds.iter() {
        let label = r.label_or_err()?;
        let p = m.predict_proba(r);
        let acc = by_leaf.entry(t.assign_leaf(r)).or_default();
        acc.count += 1;
        *acc.birads.entry(r.birads).or_default() += 1;
        acc.malignant += usize::from(label.is_malignant());
        acc.correct += usize::from((p >= 0.5) == label.is_malignant());
        acc.residual_sum += residual(p, label);
    }
    Ok(by_leaf
        .into_iter()
        .map(|(leaf_id, a)| {
            let n = a.count as f64;
            let mut birads: BTreeMap<Birads, usize> = Birads::ALL.iter().map(|b| (*b, 0)).collect();
            birads.extend(a.birads);
            LeafProfile {
                leaf_id,
                count: a.count,
                birads,
                malignancy_rate: a.malignant as f64 / n,
                accuracy: a.correct as f64 / n,
                mean_residual: a.residual_sum / n,
            }
        })
        .collect())
}

/// CSV with one row per leaf: counts, BI-RADS histogram columns, rates.
pub fn write_profiles_csv<W: std::io::Write>(profiles: &[LeafProfile], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["leaf".to_string(), "n".to_string()];
    header.extend(Birads::ALL.iter().map(|b| format!("birads_{b}")));
    header.extend(["malignancy_rate", "accuracy", "mean_residual"].map(String::from));
    w.write_record(&header)?;
    for p in profiles {
        let mut row = vec![p.leaf_id.to_string(), p.count.to_string()];
        row.extend(Birads::ALL.iter().map(|b| p.birads[b].to_string()));
        row.extend([p.malignancy_rate, p.accuracy, p.mean_residual].map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
