//! Greedy CART regression on a dense feature matrix.
//!
//! Each node tries every feature and every midpoint between consecutive
//! distinct sorted values, keeping the split with the lowest weighted child
//! MSE. A record goes left iff its value is strictly below the threshold.
//! Node ids follow breadth-first numbering of a full binary tree: the root is
//! 0 and the children of node i are 2i+1 and 2i+2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum decrease in node MSE required to split.
pub const MIN_GAIN: f64 = 1e-12;

/// Depth cap that keeps breadth-first ids within 64 bits.
pub const MAX_SUPPORTED_DEPTH: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        id: u64,
        feature: usize,
        threshold: f64,
        /// Positions in the node array.
        left: usize,
        right: usize,
    },
    Leaf {
        id: u64,
        /// Mean training target in the leaf.
        value: f64,
        count: usize,
    },
}

impl Node {
    pub fn id(&self) -> u64 {
        match self {
            Node::Split { id, .. } | Node::Leaf { id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    pub params: TreeParams,
    /// Root at position 0.
    pub nodes: Vec<Node>,
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted child MSE, (SSE_left + SSE_right) / n.
    pub child_mse: f64,
}

fn mse(y: &[f64], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    idx.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / n
}

/// Midpoint strictly above `lo` so that `lo` routes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Lowest weighted child MSE over all admissible (feature, threshold) pairs.
/// Earlier features and lower thresholds win exact ties.
pub fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let n_features = x[idx[0]].len();
    // center targets for numerically stable prefix sums
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for f in 0..n_features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let (mut s, mut s2) = (0.0, 0.0);
        let total_s: f64 = order.iter().map(|&i| y[i] - mean).sum();
        let total_s2: f64 = order.iter().map(|&i| (y[i] - mean).powi(2)).sum();
        for k in 0..n - 1 {
            let v = y[order[k]] - mean;
            s += v;
            s2 += v * v;
            let n_left = k + 1;
            let n_right = n - n_left;
            let lo = x[order[k]][f];
            let hi = x[order[k + 1]][f];
            if lo == hi || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let sse_left = (s2 - s * s / n_left as f64).max(0.0);
            let rs = total_s - s;
            let sse_right = (total_s2 - s2 - rs * rs / n_right as f64).max(0.0);
            let child_mse = (sse_left + sse_right) / n as f64;
            if best.is_none_or(|b| child_mse < b.child_mse) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    child_mse,
                });
            }
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, id: u64, depth: usize) -> usize {
        let pos = self.nodes.len();
        let value = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { id, value, count: idx.len() });
        if depth >= self.params.max_depth {
            return pos;
        }
        let Some(choice) = best_split(self.x, self.y, &idx, self.params.min_samples_leaf) else {
            return pos;
        };
        if mse(self.y, &idx) - choice.child_mse <= MIN_GAIN {
            return pos;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][choice.feature] < choice.threshold);
        let left = self.grow(left_idx, 2 * id + 1, depth + 1);
        let right = self.grow(right_idx, 2 * id + 2, depth + 1);
        self.nodes[pos] = Node::Split {
            id,
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        pos
    }
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: TreeParams) -> Result<RegressionTree> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if params.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if params.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::invalid(format!("max_depth above {MAX_SUPPORTED_DEPTH} is not supported")));
        }
        let n_features = x[0].len();
        if x.iter().any(|r| r.len() != n_features) {
            return Err(Error::invalid("ragged feature matrix"));
        }
        let mut b = Builder { x, y, params, nodes: Vec::new() };
        b.grow((0..x.len()).collect(), 0, 0);
        Ok(RegressionTree { n_features, params, nodes: b.nodes })
    }

    /// Position in `nodes` of the leaf reached by `row`.
    pub fn leaf_position(&self, row: &[f64]) -> usize {
        let mut pos = 0;
        loop {
            match &self.nodes[pos] {
                Node::Leaf { .. } => return pos,
                Node::Split { feature, threshold, left, right, .. } => {
                    pos = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_id(&self, row: &[f64]) -> u64 {
        self.nodes[self.leaf_position(row)].id()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_position(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("descent ends at a leaf"),
        }
    }

    /// Leaf ids in ascending order.
    pub fn leaf_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .nodes
            .iter()
            .filter_map(|n| matches!(n, Node::Leaf { .. }).then(|| n.id()))
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Depth of a node id under breadth-first numbering.
    pub fn depth_of(id: u64) -> usize {
        (64 - (id + 1).leading_zeros() - 1) as usize
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| Self::depth_of(n.id())).max().unwrap_or(0)
    }

    /// Structural checks used when loading an exported tree.
    pub fn check(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Inconsistent("tree has no nodes".into()));
        }
        let mut ids: Vec<u64> = self.nodes.iter().map(Node::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Inconsistent("duplicate tree node ids".into()));
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0u64)];
        while let Some((pos, expected)) = stack.pop() {
            let node = self
                .nodes
                .get(pos)
                .ok_or_else(|| Error::Inconsistent(format!("child position {pos} out of range")))?;
            if visited[pos] {
                return Err(Error::Inconsistent("tree node reached twice".into()));
            }
            visited[pos] = true;
            if node.id() != expected {
                return Err(Error::Inconsistent(format!("node id {} where {expected} expected", node.id())));
            }
            if let Node::Split { feature, threshold, left, right, .. } = node {
                if *feature >= self.n_features || !threshold.is_finite() {
                    return Err(Error::Inconsistent(format!("invalid split at node {expected}")));
                }
                stack.push((*left, 2 * expected + 1));
                stack.push((*right, 2 * expected + 2));
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::Inconsistent("unreachable tree nodes".into()));
        }
        Ok(())
    }
}
