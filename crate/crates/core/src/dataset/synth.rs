//! Synthetic lesion cohorts with a known conditional malignancy probability.
//!
//! Marginals:
//! - age ~ normal(52, 14), clamped to ≥ 18
//! - size_mm ~ normal(16.7, 7), clamped to [1, 30]
//! - ri ~ normal(0.45, 0.4), clamped to ≥ 0
//! - categorical fields drawn per cohort from the reference cohort proportions
//!
//! The label is Bernoulli(`GroundTruth::probability`), a logistic link on
//! standardized features mixed with a region-dependent label-flip rate.
//! The BI-RADS category is derived from the noise-free probability using the
//! lexicon's likelihood-of-malignancy ranges (3: <2%, 4a: <10%, 4b: <50%,
//! 4c: <95%, 5: ≥95%).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Birads, Cohort, Dataset, Label, LesionRecord, Margins, Orientation, Provenance, Shape};
use crate::error::{Error, Result};
use crate::sigmoid;

/// Logistic coefficients on standardized numeric features and per-category
/// offsets. All zeros yields probability 0.5 everywhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrueCoefficients {
    pub intercept: f64,
    /// Per (age − 52) / 14.
    pub age: f64,
    /// Per (size − 16.7) / 7.
    pub size_mm: f64,
    /// Per (ri − 0.45) / 0.4.
    pub ri: f64,
    pub palpable: f64,
    /// Indexed oval, round, irregular.
    pub shape: [f64; 3],
    /// Indexed circumscribed … spiculated.
    pub margins: [f64; 5],
    /// Indexed parallel, not_parallel.
    pub orientation: [f64; 2],
}

impl TrueCoefficients {
    /// A moderately informative link with roughly one-third prevalence.
    pub fn reference() -> Self {
        TrueCoefficients {
            intercept: -1.0,
            age: 0.9,
            size_mm: 0.5,
            ri: 0.7,
            palpable: 0.3,
            shape: [-0.8, -0.3, 0.6],
            margins: [-1.3, 0.0, 0.5, 0.9, 1.7],
            orientation: [-0.3, 0.5],
        }
    }

    pub fn logit(&self, r: &LesionRecord) -> f64 {
        self.intercept
            + self.age * (r.age - 52.0) / 14.0
            + self.size_mm * (r.size_mm - 16.7) / 7.0
            + self.ri * (r.ri - 0.45) / 0.4
            + if r.palpable { self.palpable } else { 0.0 }
            + self.shape[r.shape.index()]
            + self.margins[r.margins.index()]
            + self.orientation[r.orientation.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt,
    Ge,
}

/// `feature op value`, where categorical features compare by ordinal code
/// (shape oval=0…irregular=2, margins circumscribed=0…spiculated=4,
/// orientation parallel=0, palpable no=0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub op: Comparison,
    pub value: f64,
}

impl Condition {
    fn feature_value(&self, r: &LesionRecord) -> Result<f64> {
        Ok(match self.feature.as_str() {
            "age" => r.age,
            "size_mm" => r.size_mm,
            "ri" => r.ri,
            "palpable" => f64::from(u8::from(r.palpable)),
            "shape" => r.shape.index() as f64,
            "margins" => r.margins.index() as f64,
            "orientation" => r.orientation.index() as f64,
            other => return Err(Error::Generator(format!("unknown feature `{other}` in region rule"))),
        })
    }

    pub fn holds(&self, r: &LesionRecord) -> bool {
        let v = self.feature_value(r).unwrap_or(f64::NAN);
        match self.op {
            Comparison::Lt => v < self.value,
            Comparison::Ge => v >= self.value,
        }
    }
}

/// A conjunction of conditions with its own label-flip rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub conditions: Vec<Condition>,
    pub noise: f64,
}

impl Region {
    pub fn contains(&self, r: &LesionRecord) -> bool {
        self.conditions.iter().all(|c| c.holds(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_prospective_fraction")]
    pub prospective_fraction: f64,
    #[serde(default = "TrueCoefficients::reference")]
    pub coefficients: TrueCoefficients,
    /// Checked in order; the first matching region sets the flip rate.
    /// Records outside every region are noise-free.
    #[serde(default)]
    pub regions: Vec<Region>,
}

fn default_prospective_fraction() -> f64 {
    0.5
}

impl GeneratorConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            seed,
            prospective_fraction: default_prospective_fraction(),
            coefficients: TrueCoefficients::reference(),
            regions: Vec::new(),
        }
    }

    /// Four age bands with increasing label noise (0, 0.05, 0.15, 0.35).
    pub fn planted_subgroups(n: usize, seed: u64) -> Self {
        let band = |name: &str, lo: Option<f64>, hi: Option<f64>, noise: f64| {
            let mut conditions = Vec::new();
            if let Some(lo) = lo {
                conditions.push(Condition { feature: "age".into(), op: Comparison::Ge, value: lo });
            }
            if let Some(hi) = hi {
                conditions.push(Condition { feature: "age".into(), op: Comparison::Lt, value: hi });
            }
            Region { name: name.into(), conditions, noise }
        };
        GeneratorConfig {
            regions: vec![
                band("young", None, Some(43.0), 0.0),
                band("middle", Some(43.0), Some(52.0), 0.05),
                band("older", Some(52.0), Some(61.0), 0.15),
                band("oldest", Some(61.0), None, 0.35),
            ],
            ..GeneratorConfig::new(n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Generator("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.prospective_fraction) {
            return Err(Error::Generator("prospective_fraction must lie in [0, 1]".into()));
        }
        let c = &self.coefficients;
        let all = [c.intercept, c.age, c.size_mm, c.ri, c.palpable]
            .into_iter()
            .chain(c.shape)
            .chain(c.margins)
            .chain(c.orientation);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Generator("coefficients must be finite".into()));
        }
        for region in &self.regions {
            if !(0.0..=0.5).contains(&region.noise) {
                return Err(Error::Generator(format!(
                    "region `{}` noise {} outside [0, 0.5]",
                    region.name, region.noise
                )));
            }
            for cond in &region.conditions {
                cond.feature_value(&probe_record())?;
                if !cond.value.is_finite() {
                    return Err(Error::Generator(format!("region `{}` threshold not finite", region.name)));
                }
            }
        }
        Ok(())
    }
}

fn probe_record() -> LesionRecord {
    LesionRecord {
        id: String::new(),
        age: 50.0,
        size_mm: 10.0,
        ri: 0.5,
        palpable: false,
        shape: Shape::Oval,
        margins: Margins::Circumscribed,
        orientation: Orientation::Parallel,
        birads: Birads::B3,
        cohort: Cohort::Prospective,
        label: None,
    }
}

/// True P(malignant | features) of a generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coefficients: TrueCoefficients,
    pub regions: Vec<Region>,
}

impl GroundTruth {
    pub fn clean_probability(&self, r: &LesionRecord) -> f64 {
        sigmoid(self.coefficients.logit(r))
    }

    /// Index of the first region containing `r`.
    pub fn region_of(&self, r: &LesionRecord) -> Option<usize> {
        self.regions.iter().position(|g| g.contains(r))
    }

    pub fn noise_rate(&self, r: &LesionRecord) -> f64 {
        self.region_of(r).map_or(0.0, |i| self.regions[i].noise)
    }

    pub fn probability(&self, r: &LesionRecord) -> f64 {
        let p = self.clean_probability(r);
        let eta = self.noise_rate(r);
        (1.0 - eta) * p + eta * (1.0 - p)
    }
}

fn pick<T: Copy>(rng: &mut impl Rng, options: &[(T, f64)]) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (value, weight) in options {
        acc += weight;
        if u < acc {
            return *value;
        }
    }
    options.last().expect("nonempty options").0
}

fn birads_for(p: f64) -> Birads {
    match p {
        p if p < 0.02 => Birads::B3,
        p if p < 0.10 => Birads::B4a,
        p if p < 0.50 => Birads::B4b,
        p if p < 0.95 => Birads::B4c,
        _ => Birads::B5,
    }
}

pub fn synthesize(cfg: &GeneratorConfig) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let truth = GroundTruth {
        coefficients: cfg.coefficients.clone(),
        regions: cfg.regions.clone(),
    };
    let mut rng = crate::stream_rng(cfg.seed, crate::Stream::Synthesis);
    let age = Normal::<f64>::new(52.0, 14.0).expect("valid normal");
    let size = Normal::<f64>::new(16.7, 7.0).expect("valid normal");
    let ri = Normal::<f64>::new(0.45, 0.4).expect("valid normal");

    let mut records = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let cohort = if rng.random::<f64>() < cfg.prospective_fraction {
            Cohort::Prospective
        } else {
            Cohort::Retrospective
        };
        let prosp = cohort == Cohort::Prospective;
        let palpable = rng.random::<f64>() < if prosp { 0.5512 } else { 0.6417 };
        let irregular = if prosp { 0.6117 } else { 0.5180 };
        let shape = pick(
            &mut rng,
            &[
                (Shape::Oval, (1.0 - irregular) * 0.7),
                (Shape::Round, (1.0 - irregular) * 0.3),
                (Shape::Irregular, irregular),
            ],
        );
        let circ = if prosp { 0.30 } else { 0.3651 };
        let rest = 1.0 - circ;
        let margins = pick(
            &mut rng,
            &[
                (Margins::Circumscribed, circ),
                (Margins::Indistinct, rest * 0.35),
                (Margins::Angular, rest * 0.15),
                (Margins::Microlobulated, rest * 0.20),
                (Margins::Spiculated, rest * 0.30),
            ],
        );
        let parallel = if prosp { 0.7382 } else { 0.6719 };
        let orientation = pick(
            &mut rng,
            &[(Orientation::Parallel, parallel), (Orientation::NotParallel, 1.0 - parallel)],
        );
        let mut rec = LesionRecord {
            id: format!("s{i:06}"),
            age: age.sample(&mut rng).max(18.0),
            size_mm: size.sample(&mut rng).clamp(1.0, 30.0),
            ri: ri.sample(&mut rng).max(0.0),
            palpable,
            shape,
            margins,
            orientation,
            birads: Birads::B3,
            cohort,
            label: None,
        };
        rec.birads = birads_for(truth.clean_probability(&rec));
        let malignant = rng.random::<f64>() < truth.probability(&rec);
        rec.label = Some(Label::from(malignant));
        records.push(rec);
    }
    let ds = Dataset::new(records, Provenance::Generated { seed: cfg.seed })?;
    Ok((ds, truth))
}
