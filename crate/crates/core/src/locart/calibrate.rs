//! Per-leaf conformal cutoffs.
//!
//! With k calibration residuals in a leaf and target miscoverage α, the
//! default level is α̃ = ⌈(k+1)·α⌉ / k and the cutoff is the m-th smallest
//! residual with m = ⌈(1 − α̃)·k⌉ = k − ⌈(k+1)·α⌉, clamped to [1, k].
//! The `Conservative` level instead uses m = ⌈(k+1)(1 − α)⌉, clamped.

use serde::{Deserialize, Serialize};

use super::residuals::ResidualDataset;
use crate::error::{Error, Result};
use crate::tree::PartitionTree;

/// Leaves with fewer quantile-half residuals fall back to the pooled cutoff.
pub const DEFAULT_K_MIN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileLevel {
    /// α̃ = ⌈(k+1)α⌉ / k.
    #[default]
    Adjusted,
    /// m = ⌈(k+1)(1 − α)⌉.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub k_min: usize,
    pub level: QuantileLevel,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { k_min: DEFAULT_K_MIN, level: QuantileLevel::Adjusted }
    }
}

/// ⌈x⌉, treating values within a few ulps of an integer as that integer
/// (products such as 10 × 0.1 can land just above it).
pub fn ceil_tolerant(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as i64
    } else {
        x.ceil() as i64
    }
}

/// (reported α̃, 1-based order-statistic index m) for k residuals.
pub fn order_index(k: usize, alpha: f64, level: QuantileLevel) -> (f64, usize) {
    assert!(k > 0, "order index needs at least one residual");
    let kf = k as f64;
    let (alpha_tilde, m) = match level {
        QuantileLevel::Adjusted => {
            let c = ceil_tolerant((kf + 1.0) * alpha);
            (c as f64 / kf, k as i64 - c)
        }
        QuantileLevel::Conservative => {
            let m = ceil_tolerant((kf + 1.0) * (1.0 - alpha));
            (1.0 - m as f64 / kf, m)
        }
    };
    (alpha_tilde.clamp(0.0, 1.0), m.clamp(1, k as i64) as usize)
}

/// m-th smallest value (1-based) by selection.
fn order_statistic(values: &mut [f64], m: usize) -> f64 {
    let (_, v, _) = values.select_nth_unstable_by(m - 1, f64::total_cmp);
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCalibration {
    pub leaf_id: u64,
    /// Quantile-half residuals that fall in this leaf.
    pub k: usize,
    pub alpha: f64,
    /// Absent when the leaf received no residuals.
    pub alpha_tilde: Option<f64>,
    /// Order-statistic index used for this leaf's own residuals.
    pub m: Option<usize>,
    /// Cutoff applied to the leaf: its own quantile, or the pooled one
    /// when `fallback_used`.
    pub q: f64,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledCalibration {
    pub k: usize,
    pub alpha_tilde: f64,
    pub m: usize,
    pub q: f64,
}

/// Cutoffs for every leaf of a partition tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub options: CalibrationOptions,
    pub pooled: PooledCalibration,
    /// Sorted by leaf id.
    pub leaves: Vec<LeafCalibration>,
}

impl Calibration {
    pub fn leaf(&self, leaf_id: u64) -> Result<&LeafCalibration> {
        self.leaves
            .binary_search_by_key(&leaf_id, |l| l.leaf_id)
            .map(|i| &self.leaves[i])
            .map_err(|_| Error::MissingLeaf(leaf_id))
    }

    /// Every tree leaf has an entry and each entry is well-formed.
    pub fn check_against(&self, t: &PartitionTree) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Inconsistent(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.leaves.windows(2).any(|w| w[0].leaf_id >= w[1].leaf_id) {
            return Err(Error::Inconsistent("calibration leaves not sorted by id".into()));
        }
        for id in t.leaf_ids() {
            self.leaf(id).map_err(|_| {
                Error::Inconsistent(format!("tree leaf {id} has no calibration entry"))
            })?;
        }
        if let Some(l) = self.leaves.iter().find(|l| !(0.0..=1.0).contains(&l.q)) {
            return Err(Error::Inconsistent(format!("leaf {} cutoff {} outside [0, 1]", l.leaf_id, l.q)));
        }
        Ok(())
    }
}

/// Per-leaf cutoffs from the quantile half of the residual data.
pub fn calibrate_leaves(
    t: &PartitionTree,
    d1: &ResidualDataset,
    alpha: f64,
    options: CalibrationOptions,
) -> Result<Calibration> {
    if d1.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut all = d1.residuals();
    let (pooled_tilde, pooled_m) = order_index(all.len(), alpha, options.level);
    let pooled = PooledCalibration {
        k: all.len(),
        alpha_tilde: pooled_tilde,
        m: pooled_m,
        q: order_statistic(&mut all, pooled_m),
    };

    let mut per_leaf: std::collections::BTreeMap<u64, Vec<f64>> =
        t.leaf_ids().into_iter().map(|id| (id, Vec::new())).collect();
    for s in &d1.samples {
        per_leaf
            .get_mut(&t.assign_leaf(&s.record))
            .expect("assign_leaf returns a tree leaf")
            .push(s.residual);
    }
    let leaves = per_leaf
        .into_iter()
        .map(|(leaf_id, mut residuals)| {
            let k = residuals.len();
            let (alpha_tilde, m) = if k > 0 {
                let (a, m) = order_index(k, alpha, options.level);
                (Some(a), Some(m))
            } else {
                (None, None)
            };
            let own = (k >= options.k_min.max(1)).then(|| order_statistic(&mut residuals, m.unwrap()));
            LeafCalibration {
                leaf_id,
                k,
                alpha,
                alpha_tilde,
                m,
                q: own.unwrap_or(pooled.q),
                fallback_used: own.is_none(),
            }
        })
        .collect();
    Ok(Calibration { alpha, options, pooled, leaves })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let (a, m) = order_index(9, 0.1, QuantileLevel::Adjusted);
        assert!((a - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(m, 8);
        let (a, m) = order_index(99, 0.1, QuantileLevel::Adjusted);
        assert!((a - 10.0 / 99.0).abs() < 1e-15);
        assert_eq!(m, 89);
        assert_eq!(order_index(99, 0.1, QuantileLevel::Conservative).1, 90);
        assert_eq!(order_index(9, 0.1, QuantileLevel::Conservative).1, 9);
    }

    #[test]
    fn index_is_clamped() {
        assert_eq!(order_index(1, 0.5, QuantileLevel::Adjusted).1, 1);
        assert_eq!(order_index(3, 0.01, QuantileLevel::Conservative).1, 3);
    }

    #[test]
    fn tolerant_ceiling() {
        assert_eq!(ceil_tolerant(10.000000000000002), 10);
        assert_eq!(ceil_tolerant(10.01), 11);
        assert_eq!(ceil_tolerant(0.3), 1);
    }

    #[test]
    fn selection_picks_order_statistic() {
        let mut v = vec![0.9, 0.1, 0.5, 0.3, 0.7];
        assert_eq!(order_statistic(&mut v, 2), 0.3);
        assert_eq!(order_statistic(&mut v, 5), 0.9);
    }
}
