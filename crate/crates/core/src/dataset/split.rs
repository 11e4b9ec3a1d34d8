use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Cohort, Dataset, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Train only on retrospective records, test only on prospective ones.
    ByCohort,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub strategy: SplitStrategy,
    pub seed: u64,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_cal + self.n_test
    }

    /// Sizes proportional to a 513/1059/364 train/cal/test allocation.
    pub fn proportional(n: usize, strategy: SplitStrategy, seed: u64) -> Self {
        let n_train = (n as f64 * 513.0 / 1936.0).round() as usize;
        let n_test = (n as f64 * 364.0 / 1936.0).round() as usize;
        SplitSpec {
            n_train,
            n_cal: n.saturating_sub(n_train + n_test),
            n_test,
            strategy,
            seed,
        }
    }
}

/// Disjoint train/calibration/test position lists, each in ascending order.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    let n = ds.len();
    if spec.n_train == 0 || spec.n_cal == 0 || spec.n_test == 0 {
        return Err(Error::Split("all three parts must be nonempty".into()));
    }
    if spec.total() != n {
        return Err(Error::Split(format!(
            "sizes {}+{}+{} do not sum to dataset size {n}",
            spec.n_train, spec.n_cal, spec.n_test
        )));
    }
    let mut rng = crate::stream_rng(spec.seed, crate::Stream::DataSplit);
    let (mut train, mut cal, mut test) = match spec.strategy {
        SplitStrategy::Random => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let test = idx.split_off(spec.n_train + spec.n_cal);
            let cal = idx.split_off(spec.n_train);
            (idx, cal, test)
        }
        SplitStrategy::ByCohort => {
            let (mut retro, mut prosp): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| ds.records()[i].cohort == Cohort::Retrospective);
            if retro.len() < spec.n_train {
                return Err(Error::Split(format!(
                    "{} retrospective records cannot fill a training split of {}",
                    retro.len(),
                    spec.n_train
                )));
            }
            if prosp.len() < spec.n_test {
                return Err(Error::Split(format!(
                    "{} prospective records cannot fill a test split of {}",
                    prosp.len(),
                    spec.n_test
                )));
            }
            retro.shuffle(&mut rng);
            prosp.shuffle(&mut rng);
            let mut cal = retro.split_off(spec.n_train);
            cal.extend(prosp.split_off(spec.n_test));
            (retro, cal, prosp)
        }
    };
    train.sort_unstable();
    cal.sort_unstable();
    test.sort_unstable();
    Ok([train, cal, test])
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, cal, test] = split_indices(ds, spec)?;
    Ok((
        ds.select(&train, Provenance::Derived("train".into())),
        ds.select(&cal, Provenance::Derived("calibration".into())),
        ds.select(&test, Provenance::Derived("test".into())),
    ))
}
