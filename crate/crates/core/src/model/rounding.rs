use crate::error::{invalid, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Rounds a point of the simplex to an integer composition of `n`.
///
/// The first `t-1` coordinates are `round(n·u_i)` (half rounds up) and the last
/// takes the remainder. When the remainder would be negative, the coordinate
/// with the largest rounding excess `v_i - n·u_i` (lowest index on ties) is
/// decremented until the remainder reaches zero.
pub fn rd<T: Scalar>(n: usize, u: &[T]) -> Result<Vec<usize>> {
    if n < 1 {
        return invalid("rd requires n >= 1");
    }
    if u.is_empty() {
        return invalid("rd requires a non-empty weight vector");
    }
    let mut total = 0.0;
    for &x in u {
        let x = to_f64(x);
        if !(x >= 0.0) || !x.is_finite() {
            return invalid(format!("weight {x} is not a nonnegative real"));
        }
        total += x;
    }
    if (total - 1.0).abs() > 1e-10 {
        return invalid(format!("weights sum to {total}, not 1"));
    }

    let t = u.len();
    let nf: T = lit(n as f64);
    let half: T = lit(0.5);
    let targets: Vec<T> = u.iter().map(|&x| nf * x).collect();
    let mut v: Vec<i64> = targets[..t - 1]
        .iter()
        .map(|&x| to_f64((x + half).floor()) as i64)
        .collect();
    let mut last = n as i64 - v.iter().sum::<i64>();
    while last < 0 {
        let mut best: Option<(usize, T)> = None;
        for (i, (&vi, &target)) in v.iter().zip(&targets).enumerate() {
            if vi == 0 {
                continue;
            }
            let excess = lit::<T>(vi as f64) - target;
            if best.is_none_or(|(_, e)| excess > e) {
                best = Some((i, excess));
            }
        }
        let (i, _) = best.expect("a positive entry exists while the remainder is negative");
        v[i] -= 1;
        last += 1;
    }
    v.push(last);
    Ok(v.into_iter().map(|x| x as usize).collect())
}
