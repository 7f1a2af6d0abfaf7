//! Auxiliary-variable update of the global weights.
//!
//! Writing `t = α0 β`, the prior makes the `t_k` independent `Gamma(g/K, b)`
//! and the attribute weights contribute `∏_a Dir(w^(a); t)`. Introducing
//! `u_a ~ Gamma(Σ t, 1)` cancels the `Γ(Σ t)` normalizers, leaving
//! independent coordinates
//!
//! `f_k(t) ∝ Γ(t)^{-r} t^{s-1} exp(-c_k t)`, `s = g/K`,
//! `c_k = b − Σ_a ln w_k^(a) − Σ_a ln u_a`.
//!
//! For `r ≥ 1`, `(ln f_k)'' = −r ψ'(t) − (s−1)/t² < −s/t²` because
//! `ψ'(t) > 1/t`, so `f_k` is log-concave on `(0, ∞)` and is sampled exactly by
//! adaptive rejection with tangent envelopes. For `r = 0` it is `Gamma(s, b)`.
//! Since the move updates `t` as a whole, both `β = t/Σt` and `α0 = Σt` are
//! refreshed.

use rand::Rng;
use statrs::function::gamma::{digamma, ln_gamma};

use super::LOG_WEIGHT_FLOOR;
use crate::error::{HfdpError, Result};
use crate::model::dist::{sample_gamma, sample_log_gamma};
use crate::model::state::{ChainState, HfdpConfig};

/// Proposal cap per coordinate draw.
pub const MAX_PROPOSALS: usize = 10_000;

/// Parameters of one coordinate density `Γ(t)^{-r} t^{s-1} e^{-c t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinateDensity {
    pub r: f64,
    pub s: f64,
    pub c: f64,
}

impl CoordinateDensity {
    /// Unnormalized log density.
    pub fn ln_f(&self, t: f64) -> f64 {
        -self.r * ln_gamma(t) + (self.s - 1.0) * t.ln() - self.c * t
    }

    pub fn d_ln_f(&self, t: f64) -> f64 {
        -self.r * digamma(t) + (self.s - 1.0) / t - self.c
    }

    fn d2_ln_f(&self, t: f64) -> f64 {
        -self.r * trigamma(t) - (self.s - 1.0) / (t * t)
    }

    /// Root of the decreasing derivative, by bisection in `ln t`.
    pub fn mode(&self) -> f64 {
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        while self.d_ln_f(lo.exp()) <= 0.0 && lo > -700.0 {
            lo *= 2.0;
        }
        while self.d_ln_f(hi.exp()) >= 0.0 && hi < 700.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.d_ln_f(mid.exp()) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    /// One exact draw. `r ≥ 1` is required for the tangent construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.r == 0.0 {
            return sample_gamma(self.s, self.c, rng);
        }
        let mode = self.mode();
        let curv = self.d2_ln_f(mode);
        let sd = if curv < 0.0 && curv.is_finite() { (-1.0 / curv).sqrt() } else { mode };
        let left = if mode - sd > 0.0 { mode - sd } else { 0.5 * mode };
        let mut hull = Hull::new(self, &[left, mode, mode + sd]);
        for _ in 0..MAX_PROPOSALS {
            let x = hull.sample(rng);
            if !(x > 0.0) || !x.is_finite() {
                continue;
            }
            let hx = self.ln_f(x);
            if rng.random::<f64>().ln() <= hx - hull.upper(x) {
                return Ok(x);
            }
            hull.insert(self, x);
        }
        Err(HfdpError::NumericalDegeneracy(format!(
            "rejection sampler exceeded {MAX_PROPOSALS} proposals for {self:?}"
        )))
    }
}

/// Trigamma by upward recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0))) * x2 / x
}

/// Piecewise-exponential upper envelope from tangents of `ln f`.
struct Hull {
    // tangent points: abscissa, value, slope
    pts: Vec<(f64, f64, f64)>,
    // segment boundaries: 0, z_1, …, z_{n-1}, ∞
    bounds: Vec<f64>,
    log_mass: Vec<f64>,
}

impl Hull {
    fn new(f: &CoordinateDensity, xs: &[f64]) -> Self {
        let mut pts: Vec<(f64, f64, f64)> = xs.iter().map(|&x| (x, f.ln_f(x), f.d_ln_f(x))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        // the last tangent must fall so the envelope integrates on (0, ∞)
        while pts.last().is_some_and(|p| p.2 >= 0.0) {
            let x = 2.0 * pts.last().unwrap().0 + 1.0;
            pts.push((x, f.ln_f(x), f.d_ln_f(x)));
        }
        let mut h = Self { pts, bounds: Vec::new(), log_mass: Vec::new() };
        h.rebuild();
        h
    }

    fn insert(&mut self, f: &CoordinateDensity, x: f64) {
        let at = self.pts.partition_point(|p| p.0 < x);
        if self.pts.get(at).is_some_and(|p| p.0 == x) {
            return;
        }
        self.pts.insert(at, (x, f.ln_f(x), f.d_ln_f(x)));
        self.rebuild();
    }

    fn rebuild(&mut self) {
        let n = self.pts.len();
        self.bounds.clear();
        self.bounds.push(0.0);
        for j in 0..n - 1 {
            let (x0, h0, d0) = self.pts[j];
            let (x1, h1, d1) = self.pts[j + 1];
            let z = if (d0 - d1).abs() > 1e-12 * (d0.abs() + d1.abs()).max(1e-300) {
                ((h1 - x1 * d1) - (h0 - x0 * d0)) / (d0 - d1)
            } else {
                0.5 * (x0 + x1)
            };
            self.bounds.push(z.clamp(x0, x1));
        }
        self.bounds.push(f64::INFINITY);
        self.log_mass = (0..n).map(|j| self.segment_log_mass(j)).collect();
    }

    fn tangent(&self, j: usize, x: f64) -> f64 {
        let (xj, hj, dj) = self.pts[j];
        hj + dj * (x - xj)
    }

    fn upper(&self, x: f64) -> f64 {
        let j = (self.bounds.partition_point(|&z| z < x)).clamp(1, self.pts.len()) - 1;
        self.tangent(j, x)
    }

    fn segment_log_mass(&self, j: usize) -> f64 {
        let (a, b) = (self.bounds[j], self.bounds[j + 1]);
        let slope = self.pts[j].2;
        if b.is_infinite() {
            // slope < 0 guaranteed for the last piece
            return self.tangent(j, a) - (-slope).ln();
        }
        let w = b - a;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let sw = slope * w;
        if sw.abs() < 1e-10 {
            self.tangent(j, a) + w.ln()
        } else if sw > 0.0 {
            self.tangent(j, b) + (-(-sw).exp_m1() / slope).ln()
        } else {
            self.tangent(j, a) + (sw.exp_m1() / slope).ln()
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let max = self.log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = self.log_mass.iter().map(|m| (m - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut j = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                j = i;
                break;
            }
            pick -= w;
        }
        let (a, b) = (self.bounds[j], self.bounds[j + 1]);
        let slope = self.pts[j].2;
        let u: f64 = rng.random::<f64>();
        if b.is_infinite() {
            return a + (1.0 - u).ln() / slope;
        }
        let sw = slope * (b - a);
        if sw.abs() < 1e-10 {
            a + u * (b - a)
        } else if sw > 0.0 {
            b + (u + (1.0 - u) * (-sw).exp()).ln() / slope
        } else {
            a + (1.0 - u + u * sw.exp()).ln() / slope
        }
    }
}

/// One auxiliary-variable sweep over `t = α0 β`, updating `β` and `α0` in place.
pub fn update_beta<R: Rng + ?Sized>(state: &mut ChainState, config: &HfdpConfig, rng: &mut R) -> Result<()> {
    let k = state.k();
    let r = state.w.len();
    let s = config.g / k as f64;
    let total = state.alpha0;
    let mut sum_log_u = 0.0;
    for _ in 0..r {
        sum_log_u += sample_log_gamma(total, rng)?;
    }
    let mut t = Vec::with_capacity(k);
    for j in 0..k {
        let sum_log_w: f64 = state.w.iter().map(|w| w[j].max(LOG_WEIGHT_FLOOR).ln()).sum();
        let f = CoordinateDensity { r: r as f64, s, c: config.b - sum_log_w - sum_log_u };
        let tj = f.sample(rng).map_err(|e| match e {
            HfdpError::NumericalDegeneracy(m) => HfdpError::NumericalDegeneracy(format!("beta coordinate {j}: {m}")),
            other => other,
        })?;
        t.push(tj.max(f64::MIN_POSITIVE));
    }
    let sum: f64 = t.iter().sum();
    state.beta = t.iter().map(|x| x / sum).collect();
    state.alpha0 = sum;
    Ok(())
}
