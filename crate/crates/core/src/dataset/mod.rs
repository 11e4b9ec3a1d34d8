//! Lesion records, CSV ingestion, splitting, cohort summaries and the
//! synthetic generator.

mod record;
mod split;
mod summary;
mod synth;

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use record::{
    Birads, Cohort, Flag, Label, LesionRecord, Margins, Orientation, RecordInput, Shape, MAX_SIZE_MM,
    MIN_AGE,
};
pub use split::{split, SplitSpec, SplitStrategy};
pub use summary::{summarize, CohortSummary, MeanSd, SummaryStats};
pub use synth::{synthesize, Condition, Comparison, GeneratorConfig, GroundTruth, Region, TrueCoefficients};

use crate::error::{Error, FieldError, Result};

/// Exact CSV column names, in output order.
pub const CSV_COLUMNS: [&str; 11] = [
    "id",
    "age",
    "size_mm",
    "ri",
    "palpable",
    "shape",
    "margins",
    "orientation",
    "birads",
    "cohort",
    "label",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    File(String),
    Generated { seed: u64 },
    Derived(String),
}

/// Ordered collection of records with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LesionRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<LesionRecord>, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            provenance,
        })
    }

    pub fn records(&self) -> &[LesionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LesionRecord> {
        self.records.iter()
    }

    /// Subset keeping the given positions in order; ids stay unique.
    pub fn select(&self, indices: &[usize], provenance: Provenance) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            provenance,
        }
    }

    /// Records matching a predicate, in order.
    pub fn filter(&self, pred: impl Fn(&LesionRecord) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| pred(r)).cloned().collect(),
            provenance: Provenance::Derived("filtered".into()),
        }
    }

    /// Labels for every record; fails on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.records.iter().map(LesionRecord::label_or_err).collect()
    }

    pub fn into_records(self) -> Vec<LesionRecord> {
        self.records
    }
}

fn parse_number(row: usize, field: &str, raw: &str, errors: &mut Vec<FieldError>) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        errors.push(FieldError::new(field, "missing value"));
        return Ok(f64::NAN);
    }
    raw.parse::<f64>().map_err(|e| Error::Malformed {
        row,
        field: field.to_string(),
        message: format!("`{raw}` is not a number ({e})"),
    })
}

/// Parse a header-led CSV document of lesion records.
///
/// Rows are numbered from 1 (first data row). Syntax problems surface as
/// [`Error::Malformed`]; rule violations as [`Error::Validation`].
pub fn parse_csv<R: Read>(source: R, provenance: Provenance) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut col = [0usize; CSV_COLUMNS.len()];
    for (slot, name) in col.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed {
                row: 0,
                field: name.to_string(),
                message: "column missing from header".into(),
            })?;
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let get = |k: usize| row.get(col[k]).unwrap_or("");
        let mut errors = Vec::new();
        let age = parse_number(row_no, "age", get(1), &mut errors)?;
        let size_mm = parse_number(row_no, "size_mm", get(2), &mut errors)?;
        let ri = parse_number(row_no, "ri", get(3), &mut errors)?;
        let palpable = match get(4) {
            "" => {
                errors.push(FieldError::new("palpable", "missing value"));
                None
            }
            "1" => Some(Flag::Bool(true)),
            "0" => Some(Flag::Bool(false)),
            other => {
                return Err(Error::Malformed {
                    row: row_no,
                    field: "palpable".into(),
                    message: format!("`{other}` is not 0 or 1"),
                })
            }
        };
        let label = match get(10) {
            "" => None,
            "0" => Some(0),
            "1" => Some(1),
            other => {
                return Err(Error::Malformed {
                    row: row_no,
                    field: "label".into(),
                    message: format!("`{other}` is not 0, 1 or empty"),
                })
            }
        };
        let text = |k: usize| {
            let s = get(k);
            (!s.is_empty()).then(|| s.to_string())
        };
        if text(9).is_none() {
            errors.push(FieldError::new("cohort", "missing value"));
        }
        let input = RecordInput {
            id: Some(get(0).to_string()),
            age: (!age.is_nan()).then_some(age),
            size_mm: (!size_mm.is_nan()).then_some(size_mm),
            ri: (!ri.is_nan()).then_some(ri),
            palpable,
            shape: text(5),
            margins: text(6),
            orientation: text(7),
            birads: text(8),
            cohort: text(9),
            label,
        };
        match input.into_record() {
            Ok(r) if errors.is_empty() => records.push(r),
            Ok(_) => {
                return Err(Error::Validation {
                    row: Some(row_no),
                    errors,
                })
            }
            Err(Error::Validation { errors: more, .. }) => {
                // "missing value" entries are reported once
                for e in more {
                    if !errors.contains(&e) {
                        errors.push(e);
                    }
                }
                return Err(Error::Validation {
                    row: Some(row_no),
                    errors,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Dataset::new(records, provenance)
}

/// Write records in the canonical column order. Floats use the shortest
/// representation that parses back to the identical value.
pub fn write_csv<W: Write>(ds: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_COLUMNS)?;
    for r in ds.iter() {
        w.write_record([
            r.id.clone(),
            r.age.to_string(),
            r.size_mm.to_string(),
            r.ri.to_string(),
            u8::from(r.palpable).to_string(),
            r.shape.to_string(),
            r.margins.to_string(),
            r.orientation.to_string(),
            r.birads.to_string(),
            r.cohort.to_string(),
            r.label.map(|l| l.as_u8().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
