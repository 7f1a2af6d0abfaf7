//! Prior calibration: simulated balance under the prior and the gap between
//! the lifted Beta law of rounded counts and the Beta-Binomial.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{invalid, Result};
use crate::model::dist::{sample_dirichlet, sample_gamma};

/// Quantile levels reported by [`prior_balance_distribution`].
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Floor replacing zero probabilities inside logarithms.
pub const PMF_FLOOR: f64 = 1e-300;

/// Prior quantiles of weight balance and `KL(w^(1) || w^(2))` at one `(g, b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub g: f64,
    pub b: f64,
    pub k: usize,
    pub levels: usize,
    pub draws: usize,
    pub balance: [f64; 5],
    pub kl: [f64; 5],
}

/// `Σ_k w1_k ln(w1_k / w2_k)`.
pub fn weight_kl(w1: &[f64], w2: &[f64]) -> f64 {
    w1.iter()
        .zip(w2)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &q)| p * (p / q.max(PMF_FLOOR)).ln())
        .sum::<f64>()
        .max(0.0)
}

/// `min_k` of the smallest over largest weight across levels.
pub fn weight_balance(w: &[Vec<f64>]) -> f64 {
    let k = w[0].len();
    (0..k)
        .map(|j| {
            let lo = w.iter().map(|wa| wa[j]).fold(f64::INFINITY, f64::min);
            let hi = w.iter().map(|wa| wa[j]).fold(0.0, f64::max);
            if hi > 0.0 { lo / hi } else { 1.0 }
        })
        .fold(1.0, f64::min)
}

fn quantiles(values: Vec<f64>) -> [f64; 5] {
    let mut data = Data::new(values);
    QUANTILE_LEVELS.map(|q| data.quantile(q))
}

/// Forward simulation of `(α0, β, w)` from the prior, summarized by quantiles.
pub fn prior_balance_distribution<R: Rng + ?Sized>(
    g: f64,
    b: f64,
    k: usize,
    levels: usize,
    draws: usize,
    rng: &mut R,
) -> Result<CalibrationRow> {
    if draws < 100 {
        return invalid("at least 100 draws are required");
    }
    if k < 2 || levels < 2 || !(g > 0.0) || !(b > 0.0) {
        return invalid("calibration needs K >= 2, r >= 2 and positive g, b");
    }
    let mut bal = Vec::with_capacity(draws);
    let mut kl = Vec::with_capacity(draws);
    for _ in 0..draws {
        let alpha0 = sample_gamma(g, b, rng)?;
        let beta = sample_dirichlet(&vec![g / k as f64; k], rng)?;
        let conc: Vec<f64> = beta.iter().map(|x| (alpha0 * x).max(f64::MIN_POSITIVE)).collect();
        let w = (0..levels).map(|_| sample_dirichlet(&conc, rng)).collect::<Result<Vec<_>>>()?;
        bal.push(weight_balance(&w));
        kl.push(weight_kl(&w[0], &w[1]));
    }
    Ok(CalibrationRow { g, b, k, levels, draws, balance: quantiles(bal), kl: quantiles(kl) })
}

fn check_beta_params(n: usize, g1: f64, g2: f64) -> Result<()> {
    if n < 1 || !(g1 > 0.0) || !(g2 > 0.0) || !g1.is_finite() || !g2.is_finite() {
        return invalid("need N >= 1 and positive finite shape parameters");
    }
    Ok(())
}

/// Law of `m_1 = rd(N, (w, 1−w))_1` for `w ~ Beta(γ1, γ2)`: the Beta mass of
/// `[(j−½)/N, (j+½)/N)` clipped to `[0, 1]`.
pub fn lifted_beta_pmf(n: usize, g1: f64, g2: f64) -> Result<Vec<f64>> {
    check_beta_params(n, g1, g2)?;
    let nf = n as f64;
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else if x >= 1.0 { 1.0 } else { beta_reg(g1, g2, x) };
    // upper-tail mass through the mirrored Beta, avoiding 1 − F cancellation
    let sf = |x: f64| if x <= 0.0 { 1.0 } else if x >= 1.0 { 0.0 } else { beta_reg(g2, g1, 1.0 - x) };
    Ok((0..=n)
        .map(|j| {
            let lo = (j as f64 - 0.5) / nf;
            let hi = (j as f64 + 0.5) / nf;
            let p = if lo >= 0.5 { sf(lo) - sf(hi) } else { cdf(hi) - cdf(lo) };
            p.max(0.0)
        })
        .collect())
}

/// Beta-Binomial pmf `C(N, j) B(j+γ1, N−j+γ2) / B(γ1, γ2)`.
pub fn beta_binomial_pmf(n: usize, g1: f64, g2: f64) -> Result<Vec<f64>> {
    check_beta_params(n, g1, g2)?;
    let nf = n as f64;
    let ln_norm = ln_beta(g1, g2);
    Ok((0..=n)
        .map(|j| {
            let jf = j as f64;
            let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0);
            (ln_choose + ln_beta(jf + g1, nf - jf + g2) - ln_norm).exp()
        })
        .collect())
}

/// `KL(p||q) + KL(q||p)` with zeros floored at [`PMF_FLOOR`].
pub fn symmetrized_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return invalid("distributions differ in support size");
    }
    let acc: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let (a, b) = (a.max(PMF_FLOOR), b.max(PMF_FLOOR));
            (a - b) * (a / b).ln()
        })
        .sum();
    Ok(acc.max(0.0))
}

pub fn sym_kl_lifted_vs_bb(n: usize, g1: f64, g2: f64) -> Result<f64> {
    symmetrized_kl(&lifted_beta_pmf(n, g1, g2)?, &beta_binomial_pmf(n, g1, g2)?)
}
