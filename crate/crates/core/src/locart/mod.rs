//! Conformal calibration localized to the cells of a residual tree.
//!
//! Residuals `r = 1 − p̂(y | x)` on the calibration split are divided into a
//! tree half (grows the partition) and a quantile half (sets one cutoff per
//! leaf). A label enters a test lesion's set when its predicted probability
//! is at least `1 − q` for the lesion's leaf, which is equivalent to its
//! would-be residual being at most `q`.

mod calibrate;
mod report;
mod residuals;
mod sets;

pub use calibrate::{
    calibrate_leaves, ceil_tolerant, order_index, Calibration, CalibrationOptions, LeafCalibration, PooledCalibration,
    QuantileLevel, DEFAULT_K_MIN,
};
pub use report::{coverage_report, CoverageReport, CoverageRow, COVERAGE_COLUMNS};
pub use residuals::{compute_residuals, residual, split_residuals, ResidualDataset, ResidualRole, ResidualSample};
pub use sets::{labels_for, predict_set, PredictionSet};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.5;
