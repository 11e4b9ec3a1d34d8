use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cohort, Dataset, LesionRecord, Margins, Orientation, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); absent for n = 1.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<MeanSd> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.len() > 1)
            .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(MeanSd { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub age: MeanSd,
    pub size_mm: MeanSd,
    pub ri: MeanSd,
    /// Keys "yes"/"no".
    pub palpable: BTreeMap<String, f64>,
    pub shape: BTreeMap<String, f64>,
    pub margins: BTreeMap<String, f64>,
    pub orientation: BTreeMap<String, f64>,
    /// Fraction malignant among labeled records; absent if none are labeled.
    pub malignancy_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub overall: CohortSummary,
    pub cohorts: BTreeMap<Cohort, CohortSummary>,
}

impl SummaryStats {
    pub fn cohort(&self, c: Cohort) -> Option<&CohortSummary> {
        self.cohorts.get(&c)
    }
}

fn proportions<'a, T: Copy + 'a>(
    rows: &[&'a LesionRecord],
    vocabulary: &[(T, &str)],
    get: impl Fn(&LesionRecord) -> T,
) -> BTreeMap<String, f64>
where
    T: PartialEq,
{
    let n = rows.len() as f64;
    vocabulary
        .iter()
        .map(|(value, name)| {
            let count = rows.iter().filter(|r| get(r) == *value).count();
            (name.to_string(), count as f64 / n)
        })
        .collect()
}

fn cohort_summary(rows: &[&LesionRecord]) -> CohortSummary {
    let labeled: Vec<bool> = rows
        .iter()
        .filter_map(|r| r.label.map(|l| l.is_malignant()))
        .collect();
    let shapes: Vec<_> = Shape::ALL.iter().map(|s| (*s, s.as_str())).collect();
    let margins: Vec<_> = Margins::ALL.iter().map(|s| (*s, s.as_str())).collect();
    let orient: Vec<_> = Orientation::ALL.iter().map(|s| (*s, s.as_str())).collect();
    CohortSummary {
        n: rows.len(),
        age: MeanSd::of(rows.iter().map(|r| r.age)).expect("nonempty"),
        size_mm: MeanSd::of(rows.iter().map(|r| r.size_mm)).expect("nonempty"),
        ri: MeanSd::of(rows.iter().map(|r| r.ri)).expect("nonempty"),
        palpable: proportions(rows, &[(true, "yes"), (false, "no")], |r| r.palpable),
        shape: proportions(rows, &shapes, |r| r.shape),
        margins: proportions(rows, &margins, |r| r.margins),
        orientation: proportions(rows, &orient, |r| r.orientation),
        malignancy_rate: (!labeled.is_empty())
            .then(|| labeled.iter().filter(|m| **m).count() as f64 / labeled.len() as f64),
    }
}

pub fn summarize(ds: &Dataset) -> Result<SummaryStats> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let all: Vec<&LesionRecord> = ds.iter().collect();
    let cohorts = Cohort::ALL
        .iter()
        .filter_map(|c| {
            let rows: Vec<&LesionRecord> = all.iter().copied().filter(|r| r.cohort == *c).collect();
            (!rows.is_empty()).then(|| (*c, cohort_summary(&rows)))
        })
        .collect();
    Ok(SummaryStats {
        overall: cohort_summary(&all),
        cohorts,
    })
}
