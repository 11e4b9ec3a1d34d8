//! Residual regression tree that partitions the lesion space into
//! subgroups of similar model difficulty.

mod cart;
mod grid;
mod partition;
mod profile;

pub use cart::{best_split, Node, RegressionTree, SplitChoice, TreeParams, MAX_SUPPORTED_DEPTH, MIN_GAIN};
pub use grid::{tree_grid_search, TreeCvCell, TreeGridReport, DEFAULT_DEPTHS, DEFAULT_MIN_LEAVES};
pub use partition::{fit_tree, OrdinalEncoderSpec, PartitionTree, PathStep, Side};
pub use profile::{leaf_profiles, write_profiles_csv, LeafProfile};
