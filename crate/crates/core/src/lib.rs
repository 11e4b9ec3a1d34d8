//! Breast-lesion malignancy risk scoring with subgroup-local conformal
//! prediction sets.
//!
//! The pipeline: an L2-regularized logistic [`model::RiskModel`] is fitted on
//! a training split; its classification residuals on a calibration split are
//! partitioned by a CART regression tree ([`tree::PartitionTree`]); each leaf
//! gets its own conformal cutoff ([`locart::Calibration`]), and a new lesion
//! receives the set of labels whose predicted probability clears its leaf's
//! cutoff.

pub mod bundle;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod locart;
pub mod model;
pub mod pipeline;
pub mod tree;

mod folds;

pub use error::{Error, FieldError, Result};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable seeded generator for tests and ad-hoc use.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random consumers inside the pipeline. Each draws from its own ChaCha
/// stream, so one user seed shared across stages gives independent draws
/// (a split shuffle must not correlate with the generator that made the
/// records it shuffles).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Synthesis = 1,
    DataSplit = 2,
    ResidualSplit = 3,
    Folds = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Logistic function, evaluated without overflow for large |z|.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
