//! Universal and task-specific feature selection with gradient boosted trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] loads per-task CSV files, prunes unusable columns, builds a
//!   shared candidate feature set, performs the overlap-aware
//!   train/validation/test split and standardizes each task.
//! * [`trees`] grows single-task CART regression trees under a penalized
//!   impurity decrease that charges a fixed cost for every feature the model
//!   has not used yet.
//! * [`multitask`] grows trees whose topology and split features are shared by
//!   every task, choosing each feature by the maximin rule: the feature whose
//!   worst per-task gain is largest.
//! * [`boosting`] chains the two: a universal stage of multitask trees
//!   followed by independent task-specific stages.
//! * [`pathsweep`] sweeps the feature penalty on a log grid and picks the
//!   penalty preceding a 10% drop in explained variance.
//! * [`stability`] scores how consistently features are selected across
//!   randomized replicates, and [`study`] produces those replicates.
//! * [`synth`] generates datasets with planted universal and task-specific
//!   features.
//!
//! With the default `parallel` feature, split search, per-task stages, path
//! points and stability replicates run on rayon's thread pool. Building with
//! `--no-default-features` swaps in sequential iterators with identical
//! results.

// NaN must fail these checks, so they are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosting;
pub mod data;
pub mod error;
pub mod matrix;
pub mod multitask;
pub mod par;
pub mod pathsweep;
pub mod stability;
pub mod study;
pub mod synth;
pub mod trees;

pub use boosting::{BoostConfig, BoutsModel, Trainer};
pub use data::{MultitaskDataset, SplitAssignment, Standardizer, TaskDataset};
pub use error::{BoutsError, Result};
pub use matrix::Matrix;
pub use multitask::MultitaskTree;
pub use trees::{Criterion, Tree, TreeParams, UsedFeatures};
