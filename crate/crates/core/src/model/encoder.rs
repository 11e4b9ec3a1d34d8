use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LesionRecord, Margins, Orientation, Shape};
use crate::dataset::MeanSd;
use crate::error::{Error, Result};

/// Input features available to the risk model and the subgroup tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Age,
    SizeMm,
    Ri,
    Palpable,
    Shape,
    Margins,
    Orientation,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Age,
        Feature::SizeMm,
        Feature::Ri,
        Feature::Palpable,
        Feature::Shape,
        Feature::Margins,
        Feature::Orientation,
    ];

    /// Orientation is left out by default.
    pub const DEFAULT: [Feature; 6] = [
        Feature::Age,
        Feature::SizeMm,
        Feature::Ri,
        Feature::Palpable,
        Feature::Shape,
        Feature::Margins,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Age => "age",
            Feature::SizeMm => "size_mm",
            Feature::Ri => "ri",
            Feature::Palpable => "palpable",
            Feature::Shape => "shape",
            Feature::Margins => "margins",
            Feature::Orientation => "orientation",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Feature::Age | Feature::SizeMm | Feature::Ri)
    }

    /// Raw numeric value; only meaningful for numeric features.
    pub fn numeric(self, r: &LesionRecord) -> f64 {
        match self {
            Feature::Age => r.age,
            Feature::SizeMm => r.size_mm,
            Feature::Ri => r.ri,
            _ => panic!("{} is not numeric", self.name()),
        }
    }

    /// Ordinal code of a non-numeric feature, in increasing-suspicion order.
    pub fn code(self, r: &LesionRecord) -> usize {
        match self {
            Feature::Palpable => usize::from(r.palpable),
            Feature::Shape => r.shape.index(),
            Feature::Margins => r.margins.index(),
            Feature::Orientation => r.orientation.index(),
            _ => panic!("{} is not categorical", self.name()),
        }
    }

    /// Category names by code, for categorical features.
    pub fn levels(self) -> Vec<&'static str> {
        match self {
            Feature::Palpable => vec!["no", "yes"],
            Feature::Shape => Shape::ALL.iter().map(|s| s.as_str()).collect(),
            Feature::Margins => Margins::ALL.iter().map(|s| s.as_str()).collect(),
            Feature::Orientation => Orientation::ALL.iter().map(|s| s.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature: Feature,
    pub mean: f64,
    pub sd: f64,
}

/// Design-matrix layout: standardized numerics, 0/1 palpable, and full
/// one-hot blocks (no dropped reference level) for shape, margins and
/// orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub features: Vec<Feature>,
    pub scalers: Vec<Standardizer>,
    pub columns: Vec<String>,
}

fn columns_for(features: &[Feature]) -> Vec<String> {
    let mut cols = Vec::new();
    for &f in features {
        match f {
            Feature::Age | Feature::SizeMm | Feature::Ri | Feature::Palpable => {
                cols.push(f.name().to_string())
            }
            _ => cols.extend(f.levels().iter().map(|l| format!("{}={l}", f.name()))),
        }
    }
    cols
}

impl EncoderSpec {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    fn scaler(&self, f: Feature) -> Result<&Standardizer> {
        self.scalers
            .iter()
            .find(|s| s.feature == f)
            .ok_or_else(|| Error::Inconsistent(format!("no standardizer for `{f}`")))
    }

    /// Structural consistency after deserialization.
    pub fn check(&self) -> Result<()> {
        if self.columns != columns_for(&self.features) {
            return Err(Error::Inconsistent("encoder columns do not match its feature list".into()));
        }
        for &f in self.features.iter().filter(|f| f.is_numeric()) {
            let s = self.scaler(f)?;
            if !(s.sd > 0.0 && s.sd.is_finite() && s.mean.is_finite()) {
                return Err(Error::Inconsistent(format!("invalid standardizer for `{f}`")));
            }
        }
        Ok(())
    }

    pub fn encode_into(&self, r: &LesionRecord, out: &mut Vec<f64>) {
        out.clear();
        for &f in &self.features {
            match f {
                Feature::Age | Feature::SizeMm | Feature::Ri => {
                    let s = self.scaler(f).expect("encoder checked");
                    out.push((f.numeric(r) - s.mean) / s.sd);
                }
                Feature::Palpable => out.push(f64::from(u8::from(r.palpable))),
                _ => {
                    let hot = f.code(r);
                    out.extend((0..f.levels().len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
            }
        }
    }

    pub fn encode(&self, r: &LesionRecord) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.encode_into(r, &mut v);
        v
    }

    pub fn encode_all<'a>(&self, records: impl IntoIterator<Item = &'a LesionRecord>) -> Vec<Vec<f64>> {
        records.into_iter().map(|r| self.encode(r)).collect()
    }
}

/// Fit standardization on the training split; category blocks always span
/// the full vocabulary.
pub fn fit_encoder(train: &Dataset, features: &[Feature]) -> Result<EncoderSpec> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.is_empty() {
        return Err(Error::invalid("feature list is empty"));
    }
    let mut seen = Vec::new();
    for f in features {
        if seen.contains(f) {
            return Err(Error::invalid(format!("feature `{f}` listed twice")));
        }
        seen.push(*f);
    }
    let mut scalers = Vec::new();
    for &f in features.iter().filter(|f| f.is_numeric()) {
        let stats = MeanSd::of(train.iter().map(|r| f.numeric(r))).expect("nonempty");
        let (mean, sd) = (stats.mean, stats.sd.unwrap_or(0.0));
        // round-off leaves ~1e-17 spread on a constant column
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::ZeroVariance(f.name().to_string()));
        }
        scalers.push(Standardizer { feature: f, mean, sd });
    }
    Ok(EncoderSpec {
        features: features.to_vec(),
        scalers,
        columns: columns_for(features),
    })
}
