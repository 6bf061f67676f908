//! Preferential attached k-nearest-neighbor graphs (paNNG).
//!
//! A paNNG is a kNN graph whose per-node neighbor count is blended from a
//! user-chosen `kappa` and a learned one-dimensional *fitness kernel* that
//! tracks the density of the data. Low-density samples near class borders
//! end up with different neighbor counts than samples in dense cluster
//! cores, which changes how they vote.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`]: CSV loading and preprocessing into a numeric design matrix.
//! * [`density`]: brute-force neighbor orderings and Gaussian KDE.
//! * [`fitness`]: initialisation, KL-style loss, gradient and descent for the
//!   fitness kernel.
//! * [`graph`]: adaptive K vector, selection matrix `W` and its plain / mutual
//!   / directed realizations.
//! * [`classify`]: nearest-node majority-vote prediction over a graph.
//! * [`harness`]: cross-validation, eta sweeps, borderline analysis and JSON
//!   reports.
//! * [`synthetic`]: seeded Gaussian-mixture generators.

pub mod classify;
pub mod dataset;
pub mod density;
mod error;
pub mod fitness;
pub mod graph;
pub mod harness;
mod matrix;
pub mod split;
pub mod synthetic;

pub use classify::GraphClassifier;
pub use dataset::{load_csv, preprocess, Dataset, LabelColumn, Normalization, PreprocessConfig, RawTable};
pub use density::{build_index, kde, DensityEstimate, DistanceIndex, Metric};
pub use error::{Error, Result};
pub use fitness::{FitnessKernel, FitnessState, GradientMode, LearnConfig};
pub use graph::{GraphVariant, KVector, NeighborGraph};
pub use harness::{CVConfig, EtaMode, EvalReport};
pub use matrix::BinaryMatrix;
