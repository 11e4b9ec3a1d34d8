use serde::{Deserialize, Serialize};

use super::cart::TreeParams;
use super::partition::{fit_tree, PartitionTree};
use crate::error::{Error, Result};
use crate::folds::{complement, kfold};
use crate::locart::ResidualDataset;
use crate::model::Feature;

pub const DEFAULT_DEPTHS: [usize; 4] = [3, 4, 5, 6];
pub const DEFAULT_MIN_LEAVES: [usize; 4] = [70, 80, 90, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeCvCell {
    pub params: TreeParams,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGridReport {
    pub folds: usize,
    pub seed: u64,
    pub cells: Vec<TreeCvCell>,
    pub chosen: TreeParams,
}

fn subset(data: &ResidualDataset, idx: &[usize]) -> ResidualDataset {
    ResidualDataset {
        samples: idx.iter().map(|&i| data.samples[i].clone()).collect(),
        role: data.role,
    }
}

/// k-fold cross-validated choice of (max_depth, min_samples_leaf) by
/// minimum mean held-out MSE, then a refit on all of `data`.
///
/// Ties prefer the smaller depth, then the larger leaf minimum.
pub fn tree_grid_search(
    data: &ResidualDataset,
    features: &[Feature],
    depths: &[usize],
    min_leaves: &[usize],
    k: usize,
    seed: u64,
) -> Result<(PartitionTree, TreeGridReport)> {
    if depths.is_empty() || min_leaves.is_empty() {
        return Err(Error::invalid("tree grid is empty"));
    }
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if data.len() < k {
        return Err(Error::invalid(format!("{} residuals cannot fill {k} folds", data.len())));
    }
    let folds = kfold(data.len(), k, seed);
    let splits: Vec<(ResidualDataset, ResidualDataset)> = folds
        .iter()
        .map(|held| (subset(data, &complement(data.len(), held)), subset(data, held)))
        .collect();

    let mut cells = Vec::new();
    for &max_depth in depths {
        for &min_samples_leaf in min_leaves {
            let params = TreeParams { max_depth, min_samples_leaf };
            let fold_mse = splits
                .iter()
                .map(|(fit, held)| {
                    let t = fit_tree(fit, features, params)?;
                    let sse: f64 = held
                        .samples
                        .iter()
                        .map(|s| (s.residual - t.predict(&s.record)).powi(2))
                        .sum();
                    Ok(sse / held.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
            cells.push(TreeCvCell { params, fold_mse, mean_mse });
        }
    }

    let best = cells
        .iter()
        .min_by(|a, b| {
            a.mean_mse
                .total_cmp(&b.mean_mse)
                .then(a.params.max_depth.cmp(&b.params.max_depth))
                .then(b.params.min_samples_leaf.cmp(&a.params.min_samples_leaf))
        })
        .expect("grid nonempty");
    let chosen = best.params;
    let tree = fit_tree(data, features, chosen)?;
    Ok((tree, TreeGridReport { folds: k, seed, cells, chosen }))
}
