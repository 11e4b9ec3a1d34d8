//! Train, calibrate and evaluate stages shared by the command-line tool and
//! the tests.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::{ModelBundle, SubgroupCalibration};
use crate::dataset::{Birads, Dataset, Label};
use crate::error::{Error, Result};
use crate::evaluation::{
    calibration_curve, default_grid, optimize_threshold, scalar_metrics, threshold_curve, CalibrationCurve,
    ScalarMetrics, ThresholdCurve, ThresholdOutcome,
};
use crate::locart::{
    calibrate_leaves, compute_residuals, coverage_report, labels_for, split_residuals, CalibrationOptions,
    CoverageReport, PredictionSet, DEFAULT_ALPHA, DEFAULT_SPLIT_FRACTION,
};
use crate::model::{fit_encoder, grid_search, Feature, GridSearchReport, RiskModel, DEFAULT_CS, DEFAULT_FOLDS};
use crate::tree::{
    fit_tree, leaf_profiles, tree_grid_search, write_profiles_csv, LeafProfile, TreeParams, DEFAULT_DEPTHS,
    DEFAULT_MIN_LEAVES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub features: Vec<Feature>,
    pub cs: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { features: Feature::DEFAULT.to_vec(), cs: DEFAULT_CS.to_vec(), folds: DEFAULT_FOLDS, seed: 0 }
    }
}

pub fn train(train: &Dataset, cfg: &TrainConfig) -> Result<(RiskModel, GridSearchReport)> {
    let enc = fit_encoder(train, &cfg.features)?;
    grid_search(train, &enc, &cfg.cs, cfg.folds, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSelection {
    Grid { depths: Vec<usize>, min_leaves: Vec<usize>, folds: usize },
    Fixed(TreeParams),
}

impl Default for TreeSelection {
    fn default() -> Self {
        TreeSelection::Grid {
            depths: DEFAULT_DEPTHS.to_vec(),
            min_leaves: DEFAULT_MIN_LEAVES.to_vec(),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub alpha: f64,
    pub fraction: f64,
    pub seed: u64,
    pub tree_features: Vec<Feature>,
    pub selection: TreeSelection,
    pub options: CalibrationOptions,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            fraction: DEFAULT_SPLIT_FRACTION,
            seed: 0,
            tree_features: Feature::DEFAULT.to_vec(),
            selection: TreeSelection::default(),
            options: CalibrationOptions::default(),
        }
    }
}

/// Residuals on `cal`, split in two; the first half grows the tree and the
/// second sets the per-leaf cutoffs.
pub fn calibrate(model: &RiskModel, cal: &Dataset, cfg: &CalibrateConfig) -> Result<SubgroupCalibration> {
    let rd = compute_residuals(model, cal)?;
    let (d0, d1) = split_residuals(&rd, cfg.fraction, cfg.seed)?;
    let (tree, tree_grid) = match &cfg.selection {
        TreeSelection::Grid { depths, min_leaves, folds } => {
            let (t, r) = tree_grid_search(&d0, &cfg.tree_features, depths, min_leaves, *folds, cfg.seed)?;
            (t, Some(r))
        }
        TreeSelection::Fixed(p) => (fit_tree(&d0, &cfg.tree_features, *p)?, None),
    };
    let calibration = calibrate_leaves(&tree, &d1, cfg.alpha, cfg.options)?;
    let profiles = leaf_profiles(&tree, cal, model)?;
    Ok(SubgroupCalibration { tree, calibration, profiles, fraction: cfg.fraction, seed: cfg.seed, tree_grid })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Defaults to the malignancy rate of BI-RADS 4b lesions in the subset.
    pub ppv_floor: Option<f64>,
    pub birads: Vec<Birads>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { ppv_floor: None, birads: vec![Birads::B4a, Birads::B4b] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub calibration_bins: usize,
    pub curve_steps: usize,
    pub threshold: Option<ThresholdConfig>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { calibration_bins: 10, curve_steps: 100, threshold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub birads: Vec<Birads>,
    pub n_subset: usize,
    pub outcome: ThresholdOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub n: usize,
    pub alpha: f64,
    pub scalar: ScalarMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub metrics: MetricsDocument,
    pub curve: ThresholdCurve,
    pub calibration: CalibrationCurve,
    pub coverage: CoverageReport,
    pub profiles: Vec<LeafProfile>,
    pub threshold: Option<ThresholdReport>,
}

pub const METRICS_FILE: &str = "metrics.json";
pub const CURVE_FILE: &str = "threshold_curve.csv";
pub const CALIBRATION_FILE: &str = "calibration_bins.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const PROFILES_FILE: &str = "leaf_profiles.csv";
pub const THRESHOLD_FILE: &str = "threshold_decision.json";

/// Prediction sets for every record of `ds`.
pub fn prediction_sets(bundle: &ModelBundle, ds: &Dataset) -> Result<Vec<PredictionSet>> {
    let s = bundle.calibrated()?;
    ds.iter()
        .map(|r| {
            let leaf_id = s.tree.assign_leaf(r);
            let q = s.calibration.leaf(leaf_id)?.q;
            let p = bundle.model.predict_proba(r);
            Ok(PredictionSet { labels: labels_for(p, q), leaf_id, q, cutoff: 1.0 - q, p_malignant: p })
        })
        .collect()
}

fn malignancy_rate(ds: &Dataset, b: Birads) -> Option<f64> {
    let labels: Vec<Label> = ds.iter().filter(|r| r.birads == b).filter_map(|r| r.label).collect();
    (!labels.is_empty()).then(|| labels.iter().filter(|l| l.is_malignant()).count() as f64 / labels.len() as f64)
}

pub fn evaluate(bundle: &ModelBundle, test: &Dataset, cfg: &EvaluateConfig) -> Result<EvaluationReport> {
    let s = bundle.calibrated()?;
    let labels = test.labels()?;
    let probs: Vec<f64> = test.iter().map(|r| bundle.model.predict_proba(r)).collect();
    let sets = prediction_sets(bundle, test)?;
    let threshold = match &cfg.threshold {
        None => None,
        Some(tc) => {
            let subset = test.filter(|r| tc.birads.contains(&r.birads));
            if subset.is_empty() {
                return Err(Error::invalid("no test lesions in the requested BI-RADS categories"));
            }
            let floor = match tc.ppv_floor {
                Some(f) => f,
                None => malignancy_rate(&subset, Birads::B4b)
                    .ok_or_else(|| Error::invalid("no BI-RADS 4b lesions to anchor the PPV floor; pass one"))?,
            };
            let sub_probs: Vec<f64> = subset.iter().map(|r| bundle.model.predict_proba(r)).collect();
            Some(ThresholdReport {
                birads: tc.birads.clone(),
                n_subset: subset.len(),
                outcome: optimize_threshold(&sub_probs, &subset.labels()?, floor)?,
            })
        }
    };
    Ok(EvaluationReport {
        metrics: MetricsDocument { n: test.len(), alpha: s.calibration.alpha, scalar: scalar_metrics(&probs, &labels)? },
        curve: threshold_curve(&probs, &labels, &default_grid(cfg.curve_steps))?,
        calibration: calibration_curve(&probs, &labels, cfg.calibration_bins)?,
        coverage: coverage_report(&sets, &labels, s.calibration.alpha)?,
        profiles: leaf_profiles(&s.tree, test, &bundle.model)?,
        threshold,
    })
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(value: &T, sink: BufWriter<File>) -> Result<()> {
    let mut sink = sink;
    serde_json::to_writer_pretty(&mut sink, value)?;
    std::io::Write::write_all(&mut sink, b"\n")?;
    std::io::Write::flush(&mut sink)?;
    Ok(())
}

impl EvaluationReport {
    /// Write every report file into `dir`, returning the paths written.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        write_json(&self.metrics, create(dir, METRICS_FILE, &mut written)?)?;
        self.curve.write_csv(create(dir, CURVE_FILE, &mut written)?)?;
        self.calibration.write_csv(create(dir, CALIBRATION_FILE, &mut written)?)?;
        self.coverage.write_csv(create(dir, COVERAGE_FILE, &mut written)?)?;
        write_profiles_csv(&self.profiles, create(dir, PROFILES_FILE, &mut written)?)?;
        if let Some(t) = &self.threshold {
            write_json(t, create(dir, THRESHOLD_FILE, &mut written)?)?;
        }
        Ok(written)
    }
}
