//! Scalar abstraction shared by the model mathematics.
//!
//! Everything that is pure arithmetic on data (NIW updates, marginal
//! likelihoods, Gaussian densities, fairness metrics) is written against
//! [`Scalar`], so it runs in `f32` or `f64`. Special functions are evaluated
//! in `f64` and converted back.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the model: `f32` or `f64`.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar converts to f64")
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    lit(statrs::function::gamma::ln_gamma(to_f64(x)))
}

/// Log multivariate gamma `ln Γ_d(x) = d(d-1)/4 ln π + Σ_{j=1}^{d} ln Γ(x + (1-j)/2)`.
pub fn ln_multigamma<T: Scalar>(x: T, d: usize) -> T {
    let x = to_f64(x);
    let dd = d as f64;
    let mut acc = dd * (dd - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=d {
        acc += statrs::function::gamma::ln_gamma(x + (1.0 - j as f64) / 2.0);
    }
    lit(acc)
}

pub fn neg_infinity<T: Scalar>() -> T {
    lit(f64::NEG_INFINITY)
}

pub fn is_finite<T: Scalar>(x: T) -> bool {
    to_f64(x).is_finite()
}
