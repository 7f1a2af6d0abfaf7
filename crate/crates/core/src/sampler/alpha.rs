//! Random-walk Metropolis update of the concentration `α0` on the log scale.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::LOG_WEIGHT_FLOOR;
use crate::error::{HfdpError, Result};

/// Target acceptance rate of the adapted proposal.
pub const TARGET_ACCEPTANCE: f64 = 0.4;

/// Log full conditional of `α0` given `β` and the attribute weights `w`, up to a constant:
/// `r ln Γ(α) − r Σ_k ln Γ(α β_k) + α Σ_{a,k} β_k ln w_k^(a) + (g−1) ln α − b α`.
pub fn alpha0_log_density(alpha: f64, beta: &[f64], w: &[Vec<f64>], g: f64, b: f64) -> f64 {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return f64::NEG_INFINITY;
    }
    let r = w.len() as f64;
    let mut acc = (g - 1.0) * alpha.ln() - b * alpha;
    if r > 0.0 {
        acc += r * ln_gamma(alpha);
        for (k, &bk) in beta.iter().enumerate() {
            if bk <= 0.0 {
                continue;
            }
            acc -= r * ln_gamma(alpha * bk);
            let sum_log_w: f64 = w.iter().map(|wa| wa[k].max(LOG_WEIGHT_FLOOR).ln()).sum();
            acc += alpha * bk * sum_log_w;
        }
    }
    acc
}

/// Proposal scale with Robbins–Monro adaptation, used only during burn-in.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaProposal {
    pub log_scale: f64,
    adaptations: usize,
}

impl AlphaProposal {
    pub fn new(scale: f64) -> Self {
        Self { log_scale: scale.ln(), adaptations: 0 }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn adapt(&mut self, accepted: bool) {
        self.adaptations += 1;
        let step = 1.0 / (self.adaptations as f64).sqrt();
        self.log_scale += step * (if accepted { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE);
        self.log_scale = self.log_scale.clamp(-10.0, 5.0);
    }
}

/// One Metropolis step; proposal `α' = α e^{σ ξ}`, so the ratio carries the
/// Jacobian `α'/α`. Returns the new value and whether it moved.
pub fn update_alpha0<R: Rng + ?Sized>(
    alpha: f64,
    beta: &[f64],
    w: &[Vec<f64>],
    g: f64,
    b: f64,
    scale: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    let current = alpha0_log_density(alpha, beta, w, g, b);
    if !current.is_finite() {
        return Err(HfdpError::Internal(format!("alpha0 log density is {current} at alpha0 = {alpha}")));
    }
    let xi: f64 = StandardNormal.sample(rng);
    let proposed = alpha * (scale * xi).exp();
    let cand = alpha0_log_density(proposed, beta, w, g, b);
    let log_ratio = cand + proposed.ln() - current - alpha.ln();
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        Ok((proposed, true))
    } else {
        Ok((alpha, false))
    }
}
