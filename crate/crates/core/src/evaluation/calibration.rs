use serde::{Deserialize, Serialize};

use super::check_inputs;
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: f64,
    pub observed_fraction: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationCurve {
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["lower", "upper", "mean_predicted", "observed_fraction", "count"])?;
        for b in &self.bins {
            w.write_record([
                b.lower.to_string(),
                b.upper.to_string(),
                b.mean_predicted.to_string(),
                b.observed_fraction.to_string(),
                b.count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Equal-width bins over [0, 1]; the last bin is closed on the right.
/// Empty bins are omitted.
pub fn calibration_curve(probs: &[f64], labels: &[Label], n_bins: usize) -> Result<CalibrationCurve> {
    check_inputs(probs, labels)?;
    if n_bins < 2 {
        return Err(Error::invalid("need at least 2 bins"));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, l) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sum_p[b] += p;
        count[b] += 1;
        pos[b] += usize::from(l.is_malignant());
    }
    let bins = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| CalibrationBin {
            lower: b as f64 / n_bins as f64,
            upper: (b + 1) as f64 / n_bins as f64,
            mean_predicted: sum_p[b] / count[b] as f64,
            observed_fraction: pos[b] as f64 / count[b] as f64,
            count: count[b],
        })
        .collect();
    Ok(CalibrationCurve { bins })
}
