//! Small dense helpers on top of nalgebra used by the Gaussian/NIW code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::scalar::{lit, Scalar};

/// Cholesky factor of a symmetric positive-definite matrix, retrying once with
/// diagonal jitter `jitter·I` when the plain factorization fails.
pub fn cholesky_with_jitter<T: Scalar>(
    m: &DMatrix<T>,
    jitter: T,
) -> Option<Cholesky<T, Dyn>> {
    let sym = symmetrize(m);
    if let Some(c) = Cholesky::new(sym.clone()) {
        return Some(c);
    }
    let n = sym.nrows();
    Cholesky::new(sym + DMatrix::<T>::identity(n, n) * jitter)
}

pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

/// `ln |A|` from a Cholesky factor.
pub fn log_det<T: Scalar>(chol: &Cholesky<T, Dyn>) -> T {
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        acc += l[(i, i)].ln();
    }
    acc * lit::<T>(2.0)
}

/// Squared Mahalanobis distance `(x-μ)ᵀ Σ⁻¹ (x-μ)` given the Cholesky of Σ.
pub fn mahalanobis_sq<T: Scalar>(chol: &Cholesky<T, Dyn>, diff: &DVector<T>) -> T {
    let l = chol.l_dirty();
    let n = diff.len();
    // forward substitution L y = diff
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = diff[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// A Gaussian with a pre-factored covariance, for repeated log-density evaluation.
#[derive(Clone, Debug)]
pub struct GaussianLogDensity<T: Scalar> {
    mean: DVector<T>,
    chol: Cholesky<T, Dyn>,
    log_norm: T,
}

impl<T: Scalar> GaussianLogDensity<T> {
    /// Returns `None` when the covariance is not positive definite.
    pub fn new(mean: DVector<T>, cov: &DMatrix<T>) -> Option<Self> {
        let chol = Cholesky::new(symmetrize(cov))?;
        let d = mean.len();
        let log_norm = -(lit::<T>(0.5) * lit::<T>(d as f64) * lit::<T>(2.0 * std::f64::consts::PI).ln())
            - lit::<T>(0.5) * log_det(&chol);
        Some(Self { mean, chol, log_norm })
    }

    pub fn ln_pdf(&self, x: &[T]) -> T {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(&a, &b)| a - b));
        self.log_norm - lit::<T>(0.5) * mahalanobis_sq(&self.chol, &diff)
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }
}
