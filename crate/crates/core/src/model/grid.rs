use serde::{Deserialize, Serialize};

use super::encoder::EncoderSpec;
use super::logistic::{fit_logistic, fit_matrix, targets, RiskModel, SolverOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::log_loss;
use crate::folds::{complement, kfold};
use crate::sigmoid;

pub const DEFAULT_CS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub c: f64,
    pub fold_log_loss: Vec<f64>,
    pub mean_log_loss: Option<f64>,
    /// Sample standard deviation across folds.
    pub sd_log_loss: Option<f64>,
    /// Why the cell was excluded (fit failure on some fold).
    pub disqualified: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub folds: usize,
    pub seed: u64,
    pub cells: Vec<CvCell>,
    pub chosen_c: f64,
}

/// Held-out log-loss of each fold for one value of C.
fn cross_validate(x: &[Vec<f64>], y: &[f64], folds: &[Vec<usize>], c: f64) -> Result<Vec<f64>> {
    let labels: Vec<_> = y.iter().map(|v| crate::dataset::Label::from(*v == 1.0)).collect();
    folds
        .iter()
        .map(|held| {
            let fit_idx = complement(x.len(), held);
            let fx: Vec<Vec<f64>> = fit_idx.iter().map(|&i| x[i].clone()).collect();
            let fy: Vec<f64> = fit_idx.iter().map(|&i| y[i]).collect();
            let fit = fit_matrix(&fx, &fy, c, SolverOptions::default())?;
            let probs: Vec<f64> = held
                .iter()
                .map(|&i| {
                    let z: f64 = x[i].iter().zip(&fit.weights).map(|(a, b)| a * b).sum::<f64>();
                    sigmoid(z + fit.intercept)
                })
                .collect();
            let truth: Vec<_> = held.iter().map(|&i| labels[i]).collect();
            log_loss(&probs, &truth)
        })
        .collect()
}

/// k-fold cross-validated choice of C by minimum mean held-out log-loss,
/// followed by a refit of the chosen C on all of `train`.
///
/// Ties keep the earliest C in grid order.
pub fn grid_search(
    train: &Dataset,
    enc: &EncoderSpec,
    cs: &[f64],
    k: usize,
    seed: u64,
) -> Result<(RiskModel, GridSearchReport)> {
    if cs.is_empty() {
        return Err(Error::invalid("C grid is empty"));
    }
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if train.len() < k {
        return Err(Error::invalid(format!("{} records cannot fill {k} folds", train.len())));
    }
    let labels = train.labels()?;
    let y = targets(&labels);
    let x = enc.encode_all(train.iter());
    let folds = kfold(x.len(), k, seed);

    let mut cells = Vec::with_capacity(cs.len());
    for &c in cs {
        let cell = match cross_validate(&x, &y, &folds, c) {
            Ok(losses) => {
                let stats = crate::dataset::MeanSd::of(losses.iter().copied()).expect("k ≥ 2");
                CvCell {
                    c,
                    fold_log_loss: losses,
                    mean_log_loss: Some(stats.mean),
                    sd_log_loss: stats.sd,
                    disqualified: None,
                }
            }
            Err(e @ (Error::NonConvergence { .. } | Error::SingleClass | Error::InvalidArgument(_))) => CvCell {
                c,
                fold_log_loss: Vec::new(),
                mean_log_loss: None,
                sd_log_loss: None,
                disqualified: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        cells.push(cell);
    }

    let mut best: Option<(f64, f64)> = None;
    for cell in &cells {
        if let Some(m) = cell.mean_log_loss {
            if best.is_none_or(|(_, bm)| m < bm) {
                best = Some((cell.c, m));
            }
        }
    }
    let (chosen_c, cv_loss) = best.ok_or_else(|| {
        Error::GridExhausted(
            cells
                .iter()
                .filter_map(|c| c.disqualified.as_ref().map(|d| format!("C={}: {d}", c.c)))
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;

    let mut model = fit_logistic(train, enc, chosen_c)?;
    model.training.seed = Some(seed);
    model.training.cv_log_loss = Some(cv_loss);
    Ok((
        model,
        GridSearchReport {
            folds: k,
            seed,
            cells,
            chosen_c,
        },
    ))
}
