//! Self-describing JSON bundle: risk model, subgroup tree, leaf cutoffs and
//! training metadata.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LesionRecord, SplitSpec};
use crate::error::{Error, Result};
use crate::locart::{labels_for, Calibration};
use crate::model::{Feature, GridSearchReport, RiskModel};
use crate::tree::{LeafProfile, PartitionTree, TreeGridReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Output of the calibration stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCalibration {
    pub tree: PartitionTree,
    pub calibration: Calibration,
    /// Profiles of the leaves on the calibration split.
    pub profiles: Vec<LeafProfile>,
    pub fraction: f64,
    pub seed: u64,
    pub tree_grid: Option<TreeGridReport>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BundleMetadata {
    /// Hex SHA-256 of the dataset file the bundle was trained on.
    pub dataset_sha256: Option<String>,
    pub split: Option<SplitSpec>,
    pub grid: Option<GridSearchReport>,
    /// RFC 3339; the only field that varies between identical runs.
    pub created_at: Option<String>,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub model: RiskModel,
    /// Absent until the bundle has been calibrated.
    pub subgroups: Option<SubgroupCalibration>,
    pub metadata: BundleMetadata,
}

/// Everything a client needs about one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// P(malignant | x).
    pub risk: f64,
    pub prediction_set: Vec<Label>,
    pub leaf_id: u64,
    pub leaf_rule_path: Vec<String>,
    /// A label enters the set when its probability is at least this.
    pub cutoff: f64,
    pub q: f64,
    pub fallback_used: bool,
    pub alpha: f64,
    pub model_version: String,
}

impl ModelBundle {
    pub fn new(model: RiskModel, metadata: BundleMetadata) -> Self {
        Self { schema_version: SCHEMA_VERSION, model, subgroups: None, metadata }
    }

    pub fn calibrated(&self) -> Result<&SubgroupCalibration> {
        self.subgroups
            .as_ref()
            .ok_or_else(|| Error::invalid("bundle has not been calibrated"))
    }

    pub fn alpha(&self) -> Option<f64> {
        self.subgroups.as_ref().map(|s| s.calibration.alpha)
    }

    /// Mutual consistency of model, tree and calibration.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        self.model.check()?;
        if let Some(s) = &self.subgroups {
            s.tree.check()?;
            s.calibration.check_against(&s.tree)?;
            if !(s.fraction > 0.0 && s.fraction < 1.0) {
                return Err(Error::Inconsistent(format!("residual split fraction {} outside (0, 1)", s.fraction)));
            }
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        self.validate()?;
        let mut sink = sink;
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    /// Parse, check the schema version, then check consistency.
    pub fn load<R: Read>(source: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(source)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Inconsistent("missing schema_version".into()))?;
        if found != u64::from(SCHEMA_VERSION) {
            return Err(Error::SchemaVersion { found: found.try_into().unwrap_or(u32::MAX), expected: SCHEMA_VERSION });
        }
        let bundle: ModelBundle = serde_json::from_value(value)?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn predict(&self, x: &LesionRecord) -> Result<PredictResponse> {
        let s = self.calibrated()?;
        let leaf_id = s.tree.assign_leaf(x);
        let leaf = s.calibration.leaf(leaf_id)?;
        let risk = self.model.predict_proba(x);
        Ok(PredictResponse {
            risk,
            prediction_set: labels_for(risk, leaf.q),
            leaf_id,
            leaf_rule_path: s.tree.rule_path(x),
            cutoff: 1.0 - leaf.q,
            q: leaf.q,
            fallback_used: leaf.fallback_used,
            alpha: s.calibration.alpha,
            model_version: self.metadata.model_version.clone(),
        })
    }

    /// Features the partition tree splits on.
    pub fn tree_features(&self) -> Option<&[Feature]> {
        self.subgroups.as_ref().map(|s| s.tree.encoder.features.as_slice())
    }
}
