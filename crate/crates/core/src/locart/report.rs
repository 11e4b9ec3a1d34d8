use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sets::PredictionSet;
use crate::dataset::Label;
use crate::error::{Error, Result};

/// Set-size and coverage statistics over one leaf, or over all test points
/// when `leaf` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub leaf: Option<u64>,
    pub n: usize,
    pub avg_set_size: f64,
    /// Fraction of sets containing the true label.
    pub coverage: f64,
    /// Fraction of sets equal to exactly {true label}.
    pub truth_only: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub alpha: f64,
    /// Sorted by leaf id.
    pub leaves: Vec<CoverageRow>,
    pub marginal: CoverageRow,
}

pub const COVERAGE_COLUMNS: [&str; 5] = ["leaf", "avg_set_size", "empirical_coverage_pct", "truth_only_pct", "n"];

impl CoverageReport {
    /// Leaf rows then a final `all` row; percentages on a 0–100 scale.
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(COVERAGE_COLUMNS)?;
        for row in self.leaves.iter().chain([&self.marginal]) {
            w.write_record([
                row.leaf.map_or_else(|| "all".to_string(), |l| l.to_string()),
                row.avg_set_size.to_string(),
                (100.0 * row.coverage).to_string(),
                (100.0 * row.truth_only).to_string(),
                row.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn leaf(&self, id: u64) -> Option<&CoverageRow> {
        self.leaves.iter().find(|r| r.leaf == Some(id))
    }
}

#[derive(Default)]
struct Tally {
    n: usize,
    size: usize,
    covered: usize,
    truth_only: usize,
}

impl Tally {
    fn add(&mut self, set: &PredictionSet, truth: Label) {
        let covered = set.contains(truth);
        self.n += 1;
        self.size += set.size();
        self.covered += usize::from(covered);
        self.truth_only += usize::from(covered && set.size() == 1);
    }

    fn row(&self, leaf: Option<u64>) -> CoverageRow {
        let n = self.n as f64;
        CoverageRow {
            leaf,
            n: self.n,
            avg_set_size: self.size as f64 / n,
            coverage: self.covered as f64 / n,
            truth_only: self.truth_only as f64 / n,
        }
    }
}

pub fn coverage_report(sets: &[PredictionSet], labels: &[Label], alpha: f64) -> Result<CoverageReport> {
    if sets.len() != labels.len() {
        return Err(Error::LengthMismatch { left: sets.len(), right: labels.len() });
    }
    if sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut all = Tally::default();
    let mut by_leaf: BTreeMap<u64, Tally> = BTreeMap::new();
    for (set, &truth) in sets.iter().zip(labels) {
        all.add(set, truth);
        by_leaf.entry(set.leaf_id).or_default().add(set, truth);
    }
    Ok(CoverageReport {
        alpha,
        leaves: by_leaf.iter().map(|(id, t)| t.row(Some(*id))).collect(),
        marginal: all.row(None),
    })
}
