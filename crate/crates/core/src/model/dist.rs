//! Random draws used by the prior and the sampler.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{invalid, HfdpError, Result};

/// `ln X` for `X ~ Gamma(shape, 1)`, accurate for very small shapes where `X`
/// itself underflows.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return invalid(format!("gamma shape {shape} must be positive and finite"));
    }
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).map_err(|e| HfdpError::InvalidInput(e.to_string()))?;
        return Ok(g.sample(rng).ln());
    }
    // Gamma(a) = Gamma(a + 1) · U^{1/a}
    let g = Gamma::new(shape + 1.0, 1.0).map_err(|e| HfdpError::InvalidInput(e.to_string()))?;
    let u: f64 = rng.random::<f64>();
    Ok(g.sample(rng).ln() + u.max(f64::MIN_POSITIVE).ln() / shape)
}

/// `X ~ Gamma(shape, rate)`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0) {
        return invalid(format!("gamma rate {rate} must be positive"));
    }
    Ok(sample_log_gamma(shape, rng)?.exp() / rate)
}

/// Dirichlet draw computed through log-gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let logs = alpha
        .iter()
        .map(|&a| sample_log_gamma(a, rng))
        .collect::<Result<Vec<_>>>()?;
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    Ok(w)
}

pub fn standard_normal_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

/// `Σ ~ Inverse-Wishart(scale, df)` via the Bartlett decomposition of its inverse.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    scale: &DMatrix<f64>,
    df: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if !(df > d as f64 - 1.0) {
        return invalid(format!("inverse-Wishart degrees of freedom {df} must exceed d - 1"));
    }
    let inv_scale = scale
        .clone()
        .try_inverse()
        .ok_or_else(|| HfdpError::InvalidInput("inverse-Wishart scale is singular".into()))?;
    let l = Cholesky::new(inv_scale)
        .ok_or_else(|| HfdpError::InvalidInput("inverse-Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| HfdpError::InvalidInput(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = &l * a;
    let wishart = &la * la.transpose();
    let sigma = wishart
        .try_inverse()
        .ok_or_else(|| HfdpError::NumericalDegeneracy("Wishart draw is singular".into()))?;
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// `x ~ N(mean, cov)`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let l = Cholesky::new(cov.clone())
        .ok_or_else(|| HfdpError::NumericalDegeneracy("covariance is not positive definite".into()))?
        .l();
    Ok(mean + l * standard_normal_vector(mean.len(), rng))
}

/// Uniform random permutation of the label multiset `{0^{m_0}, 1^{m_1}, …}`.
pub fn shuffled_labels<R: Rng + ?Sized>(occupancy: &[usize], rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut z: Vec<usize> = occupancy
        .iter()
        .enumerate()
        .flat_map(|(k, &m)| std::iter::repeat_n(k, m))
        .collect();
    z.shuffle(rng);
    z
}
