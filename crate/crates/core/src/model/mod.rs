//! Domain types and the generative model: datasets, NIW conjugate mathematics,
//! the simplex rounding map, chain states and prior simulation.

pub mod dataset;
pub mod dist;
pub mod niw;
pub mod rounding;
pub mod state;

pub use dataset::LabeledDataset;
pub use niw::{log_marginal_z, niw_posterior_params, ClusterSufficientStats, NiwParams};
pub use rounding::rd;
pub use state::{sample_component_params, sample_prior_state, ChainControls, ChainState, HfdpConfig};
