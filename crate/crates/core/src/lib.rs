//! Fair decision-tree ensembles for data with missing values.
//!
//! The crate trains depth-limited trees whose splits route missing values to a
//! learned side ("missing incorporated as attribute"), optimizing 0-1 error plus a
//! weighted group-fairness gap with a native anytime branch-and-bound. Around that
//! core it provides:
//!
//! * [`dataset`]: CSV ingestion with an explicit missingness mask, unit scaling,
//!   per-group missingness injection, stratified splits and mini-batches.
//! * [`metrics`]: group risks, FPR/FNR/accuracy gaps, equalized odds, total variation.
//! * [`imputation`]: baseline imputers and the per-group imputation-error audit.
//! * [`theory`]: exact finite-distribution checks of the MCAR, train/test imputation
//!   mismatch and conformal-imputation constructions.
//! * [`mip`]: the full mixed-integer program for a fair MIA tree, a feasibility checker
//!   and LP-format export, used as the correctness oracle for the solver.
//! * [`tree`]: the MIA tree itself and the branch-and-bound solver.
//! * [`forest`]: the mini-batch, warm-started ensemble and majority-vote prediction.
//! * [`cli`]: the `fairmip` command-line surface.

pub mod cli;
pub mod dataset;
mod error;
pub mod forest;
pub mod imputation;
pub mod metrics;
pub mod mip;
pub mod theory;
pub mod tree;

pub use error::{Error, Result};

pub use dataset::TabularDataset;
pub use forest::{ForestModel, TrainConfig};
pub use metrics::FairnessMetric;
pub use tree::{MiaTree, SolverConfig};
