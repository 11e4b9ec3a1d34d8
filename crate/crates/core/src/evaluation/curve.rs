use serde::{Deserialize, Serialize};

use super::{check_inputs, ratio};
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn ppv(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn npv(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }
}

/// Confusion counts with positives predicted at `p ≥ t`.
pub fn confusion(probs: &[f64], labels: &[Label], t: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&p, &l) in probs.iter().zip(labels) {
        match (p >= t, l.is_malignant()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub confusion: Confusion,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub points: Vec<ThresholdPoint>,
}

impl ThresholdCurve {
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "threshold", "tp", "fp", "tn", "fn", "sensitivity", "specificity", "ppv", "npv",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            let c = p.confusion;
            w.write_record([
                p.threshold.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
                opt(p.sensitivity),
                opt(p.specificity),
                opt(p.ppv),
                opt(p.npv),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Thresholds 0, 1/steps, …, 1.
pub fn default_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

pub fn threshold_curve(probs: &[f64], labels: &[Label], grid: &[f64]) -> Result<ThresholdCurve> {
    check_inputs(probs, labels)?;
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("threshold grid must be strictly ascending within [0, 1]"));
    }
    let points = grid
        .iter()
        .map(|&t| {
            let c = confusion(probs, labels, t);
            ThresholdPoint {
                threshold: t,
                confusion: c,
                sensitivity: c.sensitivity(),
                specificity: c.specificity(),
                ppv: c.ppv(),
                npv: c.npv(),
            }
        })
        .collect();
    Ok(ThresholdCurve { points })
}
