//! Collapsed Gibbs sampler and MC-EM mode finder.
//!
//! A sweep updates `α0` (Metropolis), `t = α0 β` (auxiliary variables and
//! exact rejection sampling), each `w^(a)` (Dirichlet) with `m^(a) = rd(N_a, w^(a))`,
//! and each `z^(a)` (transport optimum, mutated by the weighted rectangular
//! loop sampler, then a Barker choice between the two). With attribute
//! beliefs the protected labels are redrawn at the end of the sweep.

pub mod alpha;
pub mod attributes;
pub mod beta;
pub mod init;
pub mod zstep;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use alpha::{alpha0_log_density, update_alpha0, AlphaProposal};
pub use attributes::{resample_attributes, AttributeBeliefs};
pub use beta::{update_beta, CoordinateDensity};
pub use init::{default_niw_priors, initial_state};

use crate::error::{HfdpError, Result};
use crate::model::dataset::LabeledDataset;
use crate::model::dist::{sample_dirichlet, shuffled_labels};
use crate::model::niw::log_marginal_z;
use crate::model::rounding::rd;
use crate::model::state::{sample_prior_state, ChainState, HfdpConfig};

/// Floor applied to weights before taking logarithms.
pub const LOG_WEIGHT_FLOOR: f64 = 1e-300;

/// Consecutive unchanged sweeps that stop MC-EM.
pub const MCEM_PATIENCE: usize = 5;

/// Whether the data enter the label and weight updates. `PriorOnly` leaves
/// counts out of the weight update and draws labels uniformly given the
/// occupancy, so the chain targets the prior; used to validate the sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Likelihood {
    #[default]
    Data,
    PriorOnly,
}

#[derive(Clone, Debug, Default)]
pub struct GibbsOptions {
    pub likelihood: Likelihood,
    pub beliefs: Option<AttributeBeliefs>,
    /// Verify the state invariants after every sweep.
    pub check_invariants: bool,
    /// Starting state; drawn from the prior (`PriorOnly`) or fitted from the data otherwise.
    pub initial: Option<ChainState>,
}

/// Per-sample diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iteration: usize,
    pub alpha_accepted: bool,
    /// Per attribute: whether the mutated matrix replaced the transport optimum.
    pub z_accepted: Vec<bool>,
    /// `Σ_a ln p(x^(a) | z^(a))` under the NIW marginal.
    pub log_marginal: f64,
}

/// One stored draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub state: ChainState,
    /// Cluster labels in dataset order.
    pub assignment: Vec<usize>,
    /// Protected labels in use, when they are resampled.
    pub attributes: Option<Vec<usize>>,
}

/// Thinned post-burn-in draws with aligned diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub samples: Vec<TraceSample>,
    pub diagnostics: Vec<Diagnostics>,
    /// Acceptance rate of the `α0` step after burn-in.
    pub alpha_acceptance: f64,
    pub alpha_proposal_scale: f64,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `w^(a) ~ Dir(α0 β + m^(a))` (counts dropped under `PriorOnly`), then `m^(a) = rd(N_a, w^(a))`.
pub fn update_weights<R: Rng + ?Sized>(state: &mut ChainState, likelihood: Likelihood, rng: &mut R) -> Result<()> {
    for a in 0..state.w.len() {
        let n: usize = state.m[a].iter().sum();
        let conc: Vec<f64> = state
            .beta
            .iter()
            .zip(&state.m[a])
            .map(|(&b, &m)| {
                let base = (state.alpha0 * b).max(f64::MIN_POSITIVE);
                if likelihood == Likelihood::Data { base + m as f64 } else { base }
            })
            .collect();
        let w = sample_dirichlet(&conc, rng)?;
        if n > 0 {
            state.m[a] = rd(n, &w)?;
        }
        state.w[a] = w;
    }
    Ok(())
}

fn wrla_steps(config: &HfdpConfig, n_a: usize) -> usize {
    config.chain.wrla_steps.unwrap_or(50 * n_a)
}

fn check_shapes(dataset: &LabeledDataset<f64>, config: &HfdpConfig) -> Result<()> {
    config.validate()?;
    if config.levels() != dataset.levels() {
        return Err(HfdpError::InvalidInput(format!(
            "{} NIW priors for {} attribute levels",
            config.levels(),
            dataset.levels()
        )));
    }
    if config.niw[0].dim() != dataset.dim() {
        return Err(HfdpError::InvalidInput("NIW prior dimension differs from the data".into()));
    }
    Ok(())
}

/// `Σ_a` collapsed log marginal of the labels.
pub fn total_log_marginal(state: &ChainState, dataset: &LabeledDataset<f64>, config: &HfdpConfig) -> Result<f64> {
    let mut acc = 0.0;
    for a in 0..dataset.levels() {
        acc += log_marginal_z(&state.z[a], &dataset.attribute_points(a), &config.niw[a])?;
    }
    Ok(acc)
}

/// Per-attribute label update with the given occupancies.
pub fn update_z<R: Rng + ?Sized>(
    state: &mut ChainState,
    dataset: &LabeledDataset<f64>,
    config: &HfdpConfig,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let k = state.k();
    let mut accepted = Vec::with_capacity(dataset.levels());
    for a in 0..dataset.levels() {
        let pts = dataset.attribute_points(a);
        let cost = zstep::cost_matrix(&pts, &state.z[a], k, &config.niw[a])?;
        let (z, acc) = zstep::update_attribute_z(&cost, &state.m[a], wrla_steps(config, pts.len()), rng)?;
        state.z[a] = z;
        accepted.push(acc);
    }
    Ok(accepted)
}

/// Labels set to the transport optimum for every attribute.
pub fn mode_z(state: &mut ChainState, dataset: &LabeledDataset<f64>, config: &HfdpConfig) -> Result<()> {
    let k = state.k();
    for a in 0..dataset.levels() {
        let pts = dataset.attribute_points(a);
        let cost = zstep::cost_matrix(&pts, &state.z[a], k, &config.niw[a])?;
        state.z[a] = zstep::mode_labels(&cost, &state.m[a])?;
    }
    Ok(())
}

/// Redraws protected labels and re-expresses the labels per level.
fn refresh_attributes<R: Rng + ?Sized>(
    state: &mut ChainState,
    current: &LabeledDataset<f64>,
    beliefs: &AttributeBeliefs,
    rng: &mut R,
) -> Result<LabeledDataset<f64>> {
    let full = current.merge_assignment(&state.z);
    let next = match resample_attributes(current, beliefs, rng) {
        Ok(ds) => ds,
        // a level emptied out; keep the current labels for this sweep
        Err(HfdpError::InvalidInput(_)) => return Ok(current.clone()),
        Err(e) => return Err(e),
    };
    state.z = next.split_assignment(&full);
    let k = state.k();
    state.m = state
        .z
        .iter()
        .map(|za| {
            let mut m = vec![0; k];
            za.iter().for_each(|&l| m[l] += 1);
            m
        })
        .collect();
    Ok(next)
}

/// Shared sweep body; `mode` replaces the label draw by the transport optimum.
fn sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    dataset: &LabeledDataset<f64>,
    config: &HfdpConfig,
    likelihood: Likelihood,
    proposal: &mut AlphaProposal,
    adapt: bool,
    mode: bool,
    rng: &mut R,
) -> Result<(bool, Vec<bool>)> {
    let (alpha, alpha_accepted) =
        update_alpha0(state.alpha0, &state.beta, &state.w, config.g, config.b, proposal.scale(), rng)?;
    state.alpha0 = alpha;
    if adapt {
        proposal.adapt(alpha_accepted);
    }
    update_beta(state, config, rng)?;
    update_weights(state, likelihood, rng)?;
    let z_accepted = match (likelihood, mode) {
        (Likelihood::PriorOnly, _) => {
            for a in 0..state.z.len() {
                state.z[a] = shuffled_labels(&state.m[a], rng);
            }
            vec![false; state.z.len()]
        }
        (Likelihood::Data, true) => {
            mode_z(state, dataset, config)?;
            vec![false; state.z.len()]
        }
        (Likelihood::Data, false) => update_z(state, dataset, config, rng)?,
    };
    Ok((alpha_accepted, z_accepted))
}

fn starting_state<R: Rng + ?Sized>(
    dataset: &LabeledDataset<f64>,
    config: &HfdpConfig,
    options: &GibbsOptions,
    rng: &mut R,
) -> Result<ChainState> {
    let state = match (&options.initial, options.likelihood) {
        (Some(s), _) => s.clone(),
        (None, Likelihood::PriorOnly) => sample_prior_state(config, &dataset.sizes(), rng)?,
        (None, Likelihood::Data) => initial_state(dataset, config, rng)?,
    };
    if state.k() != config.k {
        return Err(HfdpError::InvalidInput("initial state has a different K".into()));
    }
    state.check_invariants(&dataset.sizes())?;
    Ok(state)
}

/// Gibbs run with default options.
pub fn run_gibbs<R: Rng + ?Sized>(dataset: &LabeledDataset<f64>, config: &HfdpConfig, rng: &mut R) -> Result<ChainTrace> {
    run_gibbs_with(dataset, config, &GibbsOptions { check_invariants: cfg!(debug_assertions), ..Default::default() }, rng)
}

pub fn run_gibbs_with<R: Rng + ?Sized>(
    dataset: &LabeledDataset<f64>,
    config: &HfdpConfig,
    options: &GibbsOptions,
    rng: &mut R,
) -> Result<ChainTrace> {
    check_shapes(dataset, config)?;
    let chain = &config.chain;
    let mut state = starting_state(dataset, config, options, rng)?;
    let mut current = dataset.clone();
    let mut proposal = AlphaProposal::new(chain.alpha_proposal_scale);
    let mut trace = ChainTrace::default();
    let (mut accepted_after_burn, mut steps_after_burn) = (0usize, 0usize);
    for iter in 0..chain.iterations {
        let burning = iter < chain.burn_in;
        let (alpha_accepted, z_accepted) =
            sweep(&mut state, &current, config, options.likelihood, &mut proposal, burning, false, rng)?;
        if let Some(beliefs) = &options.beliefs {
            current = refresh_attributes(&mut state, &current, beliefs, rng)?;
        }
        if options.check_invariants {
            state.check_invariants(&current.sizes())?;
        }
        if !burning {
            steps_after_burn += 1;
            accepted_after_burn += usize::from(alpha_accepted);
            if (iter - chain.burn_in).is_multiple_of(chain.thin) {
                let log_marginal = match options.likelihood {
                    Likelihood::Data => total_log_marginal(&state, &current, config)?,
                    Likelihood::PriorOnly => 0.0,
                };
                trace.samples.push(TraceSample {
                    assignment: current.merge_assignment(&state.z),
                    attributes: options.beliefs.as_ref().map(|_| current.labels().to_vec()),
                    state: state.clone(),
                });
                trace.diagnostics.push(Diagnostics { iteration: iter, alpha_accepted, z_accepted, log_marginal });
            }
        }
    }
    trace.alpha_acceptance = if steps_after_burn > 0 { accepted_after_burn as f64 / steps_after_burn as f64 } else { 0.0 };
    trace.alpha_proposal_scale = proposal.scale();
    Ok(trace)
}

/// Outcome of the mode finder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McemResult {
    pub state: ChainState,
    /// Cluster labels in dataset order.
    pub assignment: Vec<usize>,
    /// `Σ_a` log marginal after each sweep.
    pub log_marginal: Vec<f64>,
    pub iterations: usize,
    /// Stopped because the labels were unchanged for [`MCEM_PATIENCE`] sweeps.
    pub converged: bool,
}

/// MC-EM: the Gibbs sweep with the label draw replaced by the transport optimum.
pub fn run_mcem<R: Rng + ?Sized>(dataset: &LabeledDataset<f64>, config: &HfdpConfig, rng: &mut R) -> Result<McemResult> {
    check_shapes(dataset, config)?;
    let chain = &config.chain;
    let options = GibbsOptions::default();
    let mut state = starting_state(dataset, config, &options, rng)?;
    let mut proposal = AlphaProposal::new(chain.alpha_proposal_scale);
    let mut log_marginal = Vec::new();
    let mut previous = dataset.merge_assignment(&state.z);
    let mut unchanged = 0;
    let mut iterations = 0;
    let mut converged = false;
    for iter in 0..chain.iterations {
        sweep(&mut state, dataset, config, Likelihood::Data, &mut proposal, iter < chain.burn_in, true, rng)?;
        iterations = iter + 1;
        log_marginal.push(total_log_marginal(&state, dataset, config)?);
        let assignment = dataset.merge_assignment(&state.z);
        if assignment == previous {
            unchanged += 1;
        } else {
            unchanged = 0;
            previous = assignment;
        }
        if unchanged >= MCEM_PATIENCE {
            converged = true;
            break;
        }
    }
    Ok(McemResult { assignment: previous, state, log_marginal, iterations, converged })
}
