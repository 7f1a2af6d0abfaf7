//! Fair clustering with a hierarchical finite Dirichlet process.
//!
//! Each protected-attribute level `a` gets its own weights `w^a` around a
//! shared base `β`; a large concentration `α0` pulls every level toward the
//! same cluster proportions, which is what makes the clustering fair. Cluster
//! sizes per level are integer roundings of `N_a w^a`, and labels are updated
//! by exact fixed-margin optimal transport (mode) or a weighted rectangular
//! loop walk on the binary assignment matrix (sampling).
//!
//! Modules:
//! - [`model`]: datasets, NIW conjugacy, rounding, chain state and prior
//! - [`metrics`]: balance, MI-pivot divergence, ε-fairness, fair-score, ARI
//! - [`binmat`]: margin-preserving binary matrices and the loop walk
//! - [`transport`]: exact binary optimal transport
//! - [`sampler`]: Gibbs and MC-EM drivers with their conditional updates
//! - [`calibrate`]: prior-predictive balance and the beta-binomial comparison
//! - [`summarize`]: Dahl estimate, MAP by fair-score, cluster-count posterior
//! - [`io`]: CSV input, synthetic designs, result documents

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binmat;
pub mod calibrate;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod summarize;
pub mod transport;

pub use error::{HfdpError, Result};
pub use metrics::{adjusted_rand_index, fair_score, fairness_report, FairnessReport};
pub use model::{ChainControls, ChainState, HfdpConfig, LabeledDataset, NiwParams};
pub use sampler::{run_gibbs, run_mcem, ChainTrace, McemResult};
pub use scalar::Scalar;
pub use transport::{solve_assignment, TransportProblem};

/// Double-precision dataset, the type the sampler runs on.
pub type Dataset = LabeledDataset<f64>;
/// Single-precision dataset for scoring.
pub type Dataset32 = LabeledDataset<f32>;
pub type Niw = NiwParams<f64>;
pub type Niw32 = NiwParams<f32>;
