//! Lesion record schema and field validation.
//!
//! Categorical vocabularies are closed: any string outside the listed
//! BI-RADS lexicon values is rejected rather than added as a new category.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

pub const MIN_AGE: f64 = 18.0;
pub const MAX_SIZE_MM: f64 = 30.0;

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in [`Self::ALL`].
            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).expect("variant listed in ALL")
            }

            pub fn vocabulary() -> String {
                Self::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ")
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}` (expected one of: {})",
                        Self::vocabulary()
                    )),
                }
            }
        }
    };
}

vocabulary! {
    /// Lesion shape, ordered by increasing suspicion.
    Shape { Oval => "oval", Round => "round", Irregular => "irregular" }
}

vocabulary! {
    /// Lesion margins, ordered by increasing suspicion.
    Margins {
        Circumscribed => "circumscribed",
        Indistinct => "indistinct",
        Angular => "angular",
        Microlobulated => "microlobulated",
        Spiculated => "spiculated",
    }
}

vocabulary! {
    Orientation { Parallel => "parallel", NotParallel => "not_parallel" }
}

vocabulary! {
    /// Final BI-RADS assessment category.
    Birads { B3 => "3", B4a => "4a", B4b => "4b", B4c => "4c", B5 => "5" }
}

vocabulary! {
    Cohort { Retrospective => "retrospective", Prospective => "prospective" }
}

/// Biopsy outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Benign, Label::Malignant];

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Benign => 0,
            Label::Malignant => 1,
        }
    }

    pub fn is_malignant(self) -> bool {
        self == Label::Malignant
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Benign),
            1 => Ok(Label::Malignant),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<bool> for Label {
    fn from(malignant: bool) -> Self {
        if malignant {
            Label::Malignant
        } else {
            Label::Benign
        }
    }
}

/// One biopsied lesion: clinical, BI-RADS descriptor and Doppler features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionRecord {
    pub id: String,
    /// Years.
    pub age: f64,
    /// Millimeters, in (0, 30].
    pub size_mm: f64,
    /// Doppler resistance index.
    pub ri: f64,
    pub palpable: bool,
    pub shape: Shape,
    pub margins: Margins,
    pub orientation: Orientation,
    pub birads: Birads,
    pub cohort: Cohort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl LesionRecord {
    /// Field checks shared by every ingestion path.
    pub fn check(&self) -> std::result::Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        check_numeric(&mut errors, "age", self.age);
        check_numeric(&mut errors, "size_mm", self.size_mm);
        check_numeric(&mut errors, "ri", self.ri);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|errors| Error::Validation { row: None, errors })
    }

    pub fn label_or_err(&self) -> Result<Label> {
        self.label.ok_or_else(|| Error::Unlabeled(self.id.clone()))
    }
}

fn check_numeric(errors: &mut Vec<FieldError>, field: &str, value: f64) {
    if !value.is_finite() {
        errors.push(FieldError::new(field, "value must be a finite number"));
        return;
    }
    match field {
        "age" if value < MIN_AGE => errors.push(FieldError::new(field, "age ≥ 18 violated")),
        "size_mm" if value > MAX_SIZE_MM => {
            errors.push(FieldError::new(field, "size ≤ 30 violated"))
        }
        "size_mm" if value <= 0.0 => errors.push(FieldError::new(field, "size > 0 violated")),
        "ri" if value < 0.0 => errors.push(FieldError::new(field, "ri ≥ 0 violated")),
        _ => {}
    }
}

/// Palpability as it may arrive in JSON: a boolean or a 0/1 flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Flag {
    Bool(bool),
    Number(f64),
}

/// Loosely-typed record as submitted by API clients, before validation.
///
/// Every field is optional so that a missing value produces a per-field
/// message instead of a deserialization failure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordInput {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub age: Option<f64>,
    #[serde(default)]
    pub size_mm: Option<f64>,
    #[serde(default)]
    pub ri: Option<f64>,
    #[serde(default)]
    pub palpable: Option<Flag>,
    #[serde(default)]
    pub shape: Option<String>,
    #[serde(default)]
    pub margins: Option<String>,
    #[serde(default)]
    pub orientation: Option<String>,
    #[serde(default)]
    pub birads: Option<String>,
    #[serde(default)]
    pub cohort: Option<String>,
    #[serde(default)]
    pub label: Option<u8>,
}

fn required<T>(errors: &mut Vec<FieldError>, field: &str, v: Option<T>) -> Option<T> {
    if v.is_none() {
        errors.push(FieldError::new(field, "missing value"));
    }
    v
}

fn vocab<T: FromStr<Err = String>>(
    errors: &mut Vec<FieldError>,
    field: &str,
    v: Option<&str>,
) -> Option<T> {
    let s = required(errors, field, v)?;
    match s.trim().parse() {
        Ok(t) => Some(t),
        Err(msg) => {
            errors.push(FieldError::new(field, msg));
            None
        }
    }
}

impl RecordInput {
    /// Validate into a [`LesionRecord`], collecting every failing field.
    ///
    /// `cohort` defaults to prospective (new patients) and `birads` is
    /// required because it is reported alongside predictions.
    pub fn into_record(self) -> Result<LesionRecord> {
        let mut errors = Vec::new();
        let age = required(&mut errors, "age", self.age);
        let size_mm = required(&mut errors, "size_mm", self.size_mm);
        let ri = required(&mut errors, "ri", self.ri);
        let palpable = match required(&mut errors, "palpable", self.palpable) {
            Some(Flag::Bool(b)) => Some(b),
            Some(Flag::Number(n)) if n == 0.0 => Some(false),
            Some(Flag::Number(n)) if n == 1.0 => Some(true),
            Some(Flag::Number(n)) => {
                errors.push(FieldError::new("palpable", format!("must be 0 or 1, got {n}")));
                None
            }
            None => None,
        };
        let shape = vocab::<Shape>(&mut errors, "shape", self.shape.as_deref());
        let margins = vocab::<Margins>(&mut errors, "margins", self.margins.as_deref());
        let orientation =
            vocab::<Orientation>(&mut errors, "orientation", self.orientation.as_deref());
        let birads = vocab::<Birads>(&mut errors, "birads", self.birads.as_deref());
        let cohort = match self.cohort.as_deref() {
            None => Some(Cohort::Prospective),
            Some(_) => vocab::<Cohort>(&mut errors, "cohort", self.cohort.as_deref()),
        };
        let label = match self.label.map(Label::try_from) {
            None => None,
            Some(Ok(l)) => Some(l),
            Some(Err(msg)) => {
                errors.push(FieldError::new("label", msg));
                None
            }
        };
        for (field, value) in [("age", age), ("size_mm", size_mm), ("ri", ri)] {
            if let Some(v) = value {
                check_numeric(&mut errors, field, v);
            }
        }
        if !errors.is_empty() {
            return Err(Error::Validation { row: None, errors });
        }
        Ok(LesionRecord {
            id: self.id.unwrap_or_default(),
            age: age.unwrap(),
            size_mm: size_mm.unwrap(),
            ri: ri.unwrap(),
            palpable: palpable.unwrap(),
            shape: shape.unwrap(),
            margins: margins.unwrap(),
            orientation: orientation.unwrap(),
            birads: birads.unwrap(),
            cohort: cohort.unwrap(),
            label,
        })
    }
}

impl From<&LesionRecord> for RecordInput {
    fn from(r: &LesionRecord) -> Self {
        RecordInput {
            id: Some(r.id.clone()),
            age: Some(r.age),
            size_mm: Some(r.size_mm),
            ri: Some(r.ri),
            palpable: Some(Flag::Bool(r.palpable)),
            shape: Some(r.shape.to_string()),
            margins: Some(r.margins.to_string()),
            orientation: Some(r.orientation.to_string()),
            birads: Some(r.birads.to_string()),
            cohort: Some(r.cohort.to_string()),
            label: r.label.map(Label::as_u8),
        }
    }
}
