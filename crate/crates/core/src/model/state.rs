use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{sample_dirichlet, sample_gamma, sample_inverse_wishart, sample_mvn, shuffled_labels};
use super::niw::NiwParams;
use super::rounding::rd;
use crate::error::{invalid, HfdpError, Result};

/// Markov-chain controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainControls {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Rectangular-loop steps per attribute and sweep; `None` means `50·N_a`.
    pub wrla_steps: Option<usize>,
    /// Initial standard deviation of the log-scale random walk on `α0`.
    pub alpha_proposal_scale: f64,
}

impl Default for ChainControls {
    fn default() -> Self {
        Self { iterations: 200, burn_in: 100, thin: 5, seed: 0, wrla_steps: None, alpha_proposal_scale: 0.5 }
    }
}

impl ChainControls {
    /// Burn-in defaulting to half the iterations, thinning 5.
    pub fn with_iterations(iterations: usize, seed: u64) -> Self {
        Self { iterations, burn_in: iterations / 2, seed, ..Self::default() }
    }
}

/// Model hyperparameters plus chain controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HfdpConfig {
    /// Upper bound on the number of clusters.
    pub k: usize,
    /// Gamma shape of `α0` and total Dirichlet mass of `β`.
    pub g: f64,
    /// Gamma rate of `α0`.
    pub b: f64,
    /// ε-balance budget on the attribute/cluster divergence.
    pub epsilon: f64,
    /// One NIW prior per attribute level.
    pub niw: Vec<NiwParams<f64>>,
    pub chain: ChainControls,
}

impl HfdpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return invalid("K must be at least 2");
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return invalid("g must be positive");
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return invalid("b must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return invalid("epsilon must be nonnegative");
        }
        if self.niw.is_empty() {
            return invalid("one NIW prior per attribute level is required");
        }
        let d = self.niw[0].dim();
        for p in &self.niw {
            p.validate()?;
            if p.dim() != d {
                return invalid("NIW priors disagree on the feature dimension");
            }
        }
        if self.chain.thin == 0 {
            return invalid("thinning interval must be positive");
        }
        if self.chain.burn_in > self.chain.iterations {
            return invalid("burn-in exceeds the number of iterations");
        }
        if !(self.chain.alpha_proposal_scale > 0.0) {
            return invalid("alpha proposal scale must be positive");
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.niw.len()
    }
}

/// One state of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub alpha0: f64,
    /// Global weights on the `K`-simplex.
    pub beta: Vec<f64>,
    /// Per-attribute weights, one simplex row per level.
    pub w: Vec<Vec<f64>>,
    /// Per-attribute occupancy counts.
    pub m: Vec<Vec<usize>>,
    /// Per-attribute cluster labels, in the order of the dataset's attribute index.
    pub z: Vec<Vec<usize>>,
}

impl ChainState {
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    /// Checks every structural invariant against attribute sizes `N_a`.
    pub fn check_invariants(&self, sizes: &[usize]) -> Result<()> {
        let k = self.k();
        let fail = |msg: String| Err(HfdpError::Internal(msg));
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return fail(format!("alpha0 = {} is not positive", self.alpha0));
        }
        if (self.beta.iter().sum::<f64>() - 1.0).abs() > 1e-10 || self.beta.iter().any(|&b| b < 0.0) {
            return fail("beta is off the simplex".into());
        }
        if self.w.len() != sizes.len() || self.m.len() != sizes.len() || self.z.len() != sizes.len() {
            return fail("per-attribute blocks do not match the number of levels".into());
        }
        for (a, &n) in sizes.iter().enumerate() {
            if self.w[a].len() != k || self.m[a].len() != k {
                return fail(format!("attribute {a}: weight or occupancy length differs from K"));
            }
            if (self.w[a].iter().sum::<f64>() - 1.0).abs() > 1e-10 || self.w[a].iter().any(|&x| x < 0.0) {
                return fail(format!("attribute {a}: weights are off the simplex"));
            }
            if self.m[a].iter().sum::<usize>() != n {
                return fail(format!("attribute {a}: occupancy does not sum to N_a = {n}"));
            }
            if self.z[a].len() != n {
                return fail(format!("attribute {a}: label vector has wrong length"));
            }
            let mut counts = vec![0usize; k];
            for &l in &self.z[a] {
                if l >= k {
                    return fail(format!("attribute {a}: label {l} outside 0..{k}"));
                }
                counts[l] += 1;
            }
            if counts != self.m[a] {
                return fail(format!("attribute {a}: label counts {counts:?} differ from occupancy {:?}", self.m[a]));
            }
        }
        Ok(())
    }

    /// Number of clusters occupied in at least one attribute level.
    pub fn effective_clusters(&self) -> usize {
        (0..self.k()).filter(|&k| self.m.iter().any(|m| m[k] > 0)).count()
    }
}

/// Forward simulation of `(α0, β, w, m, z)` from the prior.
pub fn sample_prior_state<R: Rng + ?Sized>(
    config: &HfdpConfig,
    sizes: &[usize],
    rng: &mut R,
) -> Result<ChainState> {
    if config.k < 2 || !(config.g > 0.0) || !(config.b > 0.0) {
        return invalid("invalid hyperparameters");
    }
    if sizes.is_empty() || sizes.contains(&0) {
        return invalid("every attribute level needs at least one observation");
    }
    let k = config.k;
    let alpha0 = sample_gamma(config.g, config.b, rng)?;
    let beta = sample_dirichlet(&vec![config.g / k as f64; k], rng)?;
    let conc: Vec<f64> = beta.iter().map(|b| (alpha0 * b).max(f64::MIN_POSITIVE)).collect();
    let mut w = Vec::with_capacity(sizes.len());
    let mut m = Vec::with_capacity(sizes.len());
    let mut z = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let wa = sample_dirichlet(&conc, rng)?;
        let ma = rd(n, &wa)?;
        z.push(shuffled_labels(&ma, rng));
        m.push(ma);
        w.push(wa);
    }
    Ok(ChainState { alpha0, beta, w, m, z })
}

/// Component parameters `(μ_k^(a), Σ_k^(a))` drawn from each level's NIW prior.
pub fn sample_component_params<R: Rng + ?Sized>(
    niw: &[NiwParams<f64>],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<(DVector<f64>, DMatrix<f64>)>>> {
    niw.iter()
        .map(|p| {
            p.validate()?;
            (0..k)
                .map(|_| {
                    let sigma = sample_inverse_wishart(&p.scale, p.nu0, rng)?;
                    let mu = sample_mvn(&p.mu0, &(&sigma / p.lambda0), rng)?;
                    Ok((mu, sigma))
                })
                .collect()
        })
        .collect()
}
