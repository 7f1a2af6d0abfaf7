//! Normal-Inverse-Wishart conjugate mathematics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HfdpError, Result};
use crate::linalg::{cholesky_with_jitter, log_det, symmetrize};
use crate::scalar::{lit, ln_multigamma, Scalar};

/// NIW hyperparameters `(μ0, λ0, Λ0, ν0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct NiwParams<T: Scalar> {
    pub mu0: DVector<T>,
    pub lambda0: T,
    pub scale: DMatrix<T>,
    pub nu0: T,
}

impl<T: Scalar> NiwParams<T> {
    pub fn new(mu0: DVector<T>, lambda0: T, scale: DMatrix<T>, nu0: T) -> Result<Self> {
        let p = Self { mu0, lambda0, scale, nu0 };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return invalid("NIW mean must have dimension >= 1");
        }
        if self.scale.nrows() != d || self.scale.ncols() != d {
            return invalid("NIW scale matrix shape does not match the mean");
        }
        if !(self.lambda0 > T::zero()) {
            return invalid("NIW lambda0 must be positive");
        }
        if !(self.nu0 > lit::<T>(d as f64 - 1.0)) {
            return invalid(format!("NIW nu0 must exceed d - 1 = {}", d - 1));
        }
        let asym = (&self.scale - self.scale.transpose()).amax();
        if asym > lit::<T>(1e-8) * (T::one() + self.scale.amax()) {
            return invalid("NIW scale matrix is not symmetric");
        }
        if nalgebra::Cholesky::new(symmetrize(&self.scale)).is_none() {
            return invalid("NIW scale matrix is not positive definite");
        }
        Ok(())
    }

    /// Weakly informative prior centred on a point cloud: `μ0` = sample mean,
    /// `λ0 = 0.01`, `ν0 = d + 3`, and `Λ0` chosen so the prior mean covariance
    /// `Λ0/(ν0-d-1)` is a quarter of the sample covariance (plus a small ridge).
    pub fn weakly_informative(mean: DVector<T>, cov: &DMatrix<T>) -> Result<Self> {
        let d = mean.len();
        let nu0 = lit::<T>(d as f64 + 3.0);
        let ridge = lit::<T>(1e-6) * (cov.trace() / lit::<T>(d as f64) + T::one());
        let prior_cov = symmetrize(cov) * lit::<T>(0.25) + DMatrix::identity(d, d) * ridge;
        Self::new(mean, lit(0.01), prior_cov * lit::<T>(2.0), nu0)
    }

    /// Plug-in component parameters from posterior hyperparameters: the posterior
    /// mean `μ_k` and the expected covariance `Λ_k/(ν_k - d - 1)`; when that
    /// expectation does not exist the posterior mode `Λ_k/(ν_k + d + 1)` is used.
    pub fn plug_in(&self) -> (DVector<T>, DMatrix<T>) {
        let d = lit::<T>(self.dim() as f64);
        let denom = self.nu0 - d - T::one();
        let cov = if denom > T::zero() {
            &self.scale / denom
        } else {
            &self.scale / (self.nu0 + d + T::one())
        };
        (self.mu0.clone(), cov)
    }
}

/// Count, mean and scatter matrix `Σ (x - x̄)(x - x̄)ᵀ` of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSufficientStats<T: Scalar> {
    pub count: usize,
    pub mean: DVector<T>,
    pub scatter: DMatrix<T>,
}

impl<T: Scalar> ClusterSufficientStats<T> {
    pub fn empty(dim: usize) -> Self {
        Self { count: 0, mean: DVector::zeros(dim), scatter: DMatrix::zeros(dim, dim) }
    }

    pub fn from_points(points: &[&[T]], dim: usize) -> Self {
        let (mean, cov) = super::dataset::moments(points, dim);
        let n = points.len();
        Self { count: n, mean, scatter: cov * lit::<T>(n as f64) }
    }

    /// Statistics of every cluster `0..k` for a label vector over `points`.
    pub fn per_cluster(labels: &[usize], points: &[&[T]], k: usize, dim: usize) -> Vec<Self> {
        let mut members: Vec<Vec<&[T]>> = vec![Vec::new(); k];
        for (&z, &p) in labels.iter().zip(points) {
            members[z].push(p);
        }
        members.iter().map(|m| Self::from_points(m, dim)).collect()
    }
}

/// Conjugate posterior hyperparameters for one cluster.
pub fn niw_posterior_params<T: Scalar>(
    stats: &ClusterSufficientStats<T>,
    prior: &NiwParams<T>,
) -> NiwParams<T> {
    if stats.count == 0 {
        return prior.clone();
    }
    let m = lit::<T>(stats.count as f64);
    let lambda = prior.lambda0 + m;
    let nu = prior.nu0 + m;
    let mu = (&prior.mu0 * prior.lambda0 + &stats.mean * m) / lambda;
    let diff = &stats.mean - &prior.mu0;
    let shrink = prior.lambda0 * m / lambda;
    let scale = symmetrize(&(&prior.scale + &stats.scatter + (&diff * diff.transpose()) * shrink));
    NiwParams { mu0: mu, lambda0: lambda, scale, nu0: nu }
}

/// Collapsed log marginal likelihood of one attribute's labels, up to the
/// label-independent constant: the sum over non-empty clusters of
/// `ln Γ_d(ν_k/2) - ln Γ_d(ν0/2) + d/2 (ln λ0 - ln λ_k) + ν0/2 ln|Λ0| - ν_k/2 ln|Λ_k|`.
pub fn log_marginal_z<T: Scalar>(
    labels: &[usize],
    points: &[&[T]],
    prior: &NiwParams<T>,
) -> Result<T> {
    if labels.len() != points.len() {
        return invalid("label and point counts differ");
    }
    let d = prior.dim();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let stats = ClusterSufficientStats::per_cluster(labels, points, k, d);
    let jitter = prior.scale.trace() / lit::<T>(d as f64) * lit::<T>(1e-9);
    let prior_chol = cholesky_with_jitter(&prior.scale, jitter)
        .ok_or_else(|| HfdpError::NumericalDegeneracy("prior scale matrix is singular".into()))?;
    let prior_log_det = log_det(&prior_chol);
    let half = lit::<T>(0.5);
    let dd = lit::<T>(d as f64);
    let prior_gamma = ln_multigamma(prior.nu0 * half, d);

    let mut total = T::zero();
    for (cluster, s) in stats.iter().enumerate() {
        if s.count == 0 {
            continue;
        }
        let post = niw_posterior_params(s, prior);
        let chol = cholesky_with_jitter(&post.scale, jitter).ok_or_else(|| {
            HfdpError::NumericalDegeneracy(format!("posterior scale of cluster {cluster} is singular"))
        })?;
        total += ln_multigamma(post.nu0 * half, d) - prior_gamma
            + dd * half * (prior.lambda0.ln() - post.lambda0.ln())
            + prior.nu0 * half * prior_log_det
            - post.nu0 * half * log_det(&chol);
    }
    Ok(total)
}
