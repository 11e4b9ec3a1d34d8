use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cart::{Node, RegressionTree, TreeParams};
use crate::dataset::LesionRecord;
use crate::error::{Error, Result};
use crate::locart::ResidualDataset;
use crate::model::Feature;

/// Ordinal encoding for the subgroup tree: numeric features pass through,
/// categorical features map to increasing-suspicion integer codes
/// (shape oval=0, round=1, irregular=2; margins circumscribed=0 …
/// spiculated=4; orientation parallel=0; palpable no=0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalEncoderSpec {
    pub features: Vec<Feature>,
}

impl OrdinalEncoderSpec {
    pub fn new(features: &[Feature]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("tree feature list is empty"));
        }
        Ok(Self { features: features.to_vec() })
    }

    pub fn encode(&self, r: &LesionRecord) -> Vec<f64> {
        self.features
            .iter()
            .map(|&f| if f.is_numeric() { f.numeric(r) } else { f.code(r) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// value < threshold
    Below,
    /// value ≥ threshold
    AtOrAbove,
}

/// One condition along a root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub node_id: u64,
    pub feature: Feature,
    pub threshold: f64,
    pub side: Side,
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

impl PathStep {
    /// Clinician-facing form, e.g. `age < 40.5` or `margins ≥ microlobulated`.
    pub fn describe(&self) -> String {
        let name = self.feature.name();
        if self.feature.is_numeric() {
            let op = match self.side {
                Side::Below => "<",
                Side::AtOrAbove => "≥",
            };
            return format!("{name} {op} {}", trim_number(self.threshold));
        }
        let levels = self.feature.levels();
        let last = levels.len() - 1;
        let below = (self.threshold.ceil() as isize - 1).clamp(0, last as isize) as usize;
        let above = (self.threshold.ceil().max(0.0) as usize).min(last);
        match self.side {
            Side::Below if below == 0 => format!("{name} = {}", levels[0]),
            Side::Below => format!("{name} ≤ {}", levels[below]),
            Side::AtOrAbove if above == last => format!("{name} = {}", levels[last]),
            Side::AtOrAbove => format!("{name} ≥ {}", levels[above]),
        }
    }
}

/// CART regressor over residuals; its leaves are the lesion subgroups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub encoder: OrdinalEncoderSpec,
    pub tree: RegressionTree,
}

/// Grow the partition tree on (record, residual) pairs.
///
/// Too few samples for any admissible split yields a single leaf.
pub fn fit_tree(data: &ResidualDataset, features: &[Feature], params: TreeParams) -> Result<PartitionTree> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let encoder = OrdinalEncoderSpec::new(features)?;
    let x: Vec<Vec<f64>> = data.records().map(|r| encoder.encode(r)).collect();
    let tree = RegressionTree::fit(&x, &data.residuals(), params)?;
    Ok(PartitionTree { encoder, tree })
}

impl PartitionTree {
    pub fn params(&self) -> TreeParams {
        self.tree.params
    }

    pub fn assign_leaf(&self, x: &LesionRecord) -> u64 {
        self.tree.leaf_id(&self.encoder.encode(x))
    }

    /// Leaf mean residual for the record's subgroup.
    pub fn predict(&self, x: &LesionRecord) -> f64 {
        self.tree.predict(&self.encoder.encode(x))
    }

    pub fn leaf_ids(&self) -> Vec<u64> {
        self.tree.leaf_ids()
    }

    pub fn n_leaves(&self) -> usize {
        self.tree.n_leaves()
    }

    pub fn check(&self) -> Result<()> {
        if self.encoder.features.len() != self.tree.n_features {
            return Err(Error::Inconsistent(format!(
                "tree expects {} features but its encoder yields {}",
                self.tree.n_features,
                self.encoder.features.len()
            )));
        }
        self.tree.check()
    }

    /// Conditions from the root to the record's leaf.
    pub fn path(&self, x: &LesionRecord) -> Vec<PathStep> {
        let row = self.encoder.encode(x);
        let mut steps = Vec::new();
        let mut pos = 0;
        while let Node::Split { id, feature, threshold, left, right } = &self.tree.nodes[pos] {
            let below = row[*feature] < *threshold;
            steps.push(PathStep {
                node_id: *id,
                feature: self.encoder.features[*feature],
                threshold: *threshold,
                side: if below { Side::Below } else { Side::AtOrAbove },
            });
            pos = if below { *left } else { *right };
        }
        steps
    }

    pub fn rule_path(&self, x: &LesionRecord) -> Vec<String> {
        self.path(x).iter().map(PathStep::describe).collect()
    }

    /// Conditions from the root to a node given by id; `None` if no such node.
    pub fn path_to(&self, node_id: u64) -> Option<Vec<PathStep>> {
        let find = |id: u64| self.tree.nodes.iter().find(|n| n.id() == id);
        find(node_id)?;
        let mut steps = Vec::new();
        let mut id = node_id;
        while id > 0 {
            let parent = (id - 1) / 2;
            let Some(Node::Split { feature, threshold, .. }) = find(parent) else {
                return None;
            };
            steps.push(PathStep {
                node_id: parent,
                feature: self.encoder.features[*feature],
                threshold: *threshold,
                side: if id % 2 == 1 { Side::Below } else { Side::AtOrAbove },
            });
            id = parent;
        }
        steps.reverse();
        Some(steps)
    }

    /// Indented rule listing, one line per node.
    pub fn rules_text(&self) -> String {
        let mut out = String::new();
        self.write_rules(0, 0, &mut out);
        out
    }

    fn write_rules(&self, pos: usize, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        match &self.tree.nodes[pos] {
            Node::Leaf { id, value, count } => {
                let _ = writeln!(out, "{indent}leaf {id}: mean residual {}, n = {count}", trim_number(*value));
            }
            Node::Split { id, feature, threshold, left, right } => {
                let feature = self.encoder.features[*feature];
                for (side, child) in [(Side::Below, *left), (Side::AtOrAbove, *right)] {
                    let step = PathStep { node_id: *id, feature, threshold: *threshold, side };
                    let _ = writeln!(out, "{indent}if {}:", step.describe());
                    self.write_rules(child, depth + 1, out);
                }
            }
        }
    }
}
