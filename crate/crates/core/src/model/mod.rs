//! Feature encoding and the L2-regularized logistic risk model.

mod encoder;
mod grid;
mod logistic;

pub use encoder::{fit_encoder, EncoderSpec, Feature, Standardizer};
pub use grid::{grid_search, CvCell, GridSearchReport, DEFAULT_CS, DEFAULT_FOLDS};
pub use logistic::{
    fit_logistic, fit_logistic_with, fit_matrix, LogisticFit, LogisticObjective, RiskModel,
    SolverOptions, TrainingInfo,
};
