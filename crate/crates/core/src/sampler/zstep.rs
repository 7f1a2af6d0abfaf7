//! The label update: an exact optimal-transport proposal mutated by the
//! weighted rectangular loop sampler.

use rand::Rng;

use crate::binmat::{barker, log_relative_probability, wrla_run, MarginBinaryMatrix, WeightMatrix};
use crate::error::{HfdpError, Result};
use crate::linalg::{cholesky_with_jitter, GaussianLogDensity};
use crate::model::niw::{niw_posterior_params, ClusterSufficientStats, NiwParams};
use crate::transport::{solve_assignment, TransportProblem};

/// `L_ik = −ln N(x_i | μ_k, Σ_k)` with plug-in parameters from the NIW
/// posterior of each cluster under the current labels (row-major, `N_a×K`).
pub fn cost_matrix(points: &[&[f64]], labels: &[usize], k: usize, prior: &NiwParams<f64>) -> Result<Vec<f64>> {
    let d = prior.dim();
    let stats = ClusterSufficientStats::per_cluster(labels, points, k, d);
    let jitter = 1e-9 * prior.scale.trace() / d as f64;
    let mut densities = Vec::with_capacity(k);
    for (j, s) in stats.iter().enumerate() {
        let (mu, cov) = niw_posterior_params(s, prior).plug_in();
        let cov = match cholesky_with_jitter(&cov, jitter) {
            Some(c) => c.l() * c.l().transpose(),
            None => return Err(HfdpError::NumericalDegeneracy(format!("plug-in covariance of cluster {j} is singular"))),
        };
        densities.push(
            GaussianLogDensity::new(mu, &cov)
                .ok_or_else(|| HfdpError::NumericalDegeneracy(format!("plug-in covariance of cluster {j} is singular")))?,
        );
    }
    let mut cost = Vec::with_capacity(points.len() * k);
    for p in points {
        for dens in &densities {
            cost.push(-dens.ln_pdf(p));
        }
    }
    Ok(cost)
}

/// Minimum-cost labels with occupancy `m`.
pub fn mode_labels(cost: &[f64], m: &[usize]) -> Result<Vec<usize>> {
    let rows = m.iter().sum();
    let problem = TransportProblem::new(rows, m.len(), cost.to_vec(), m.to_vec())?;
    Ok(solve_assignment(&problem)?.assignment)
}

/// One attribute's label draw. Returns the labels and whether the mutated
/// matrix was chosen over the transport optimum.
pub fn update_attribute_z<R: Rng + ?Sized>(
    cost: &[f64],
    m: &[usize],
    wrla_steps: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, bool)> {
    let k = m.len();
    let n: usize = m.iter().sum();
    let proposal = MarginBinaryMatrix::from_assignment(&mode_labels(cost, m)?, k)?;
    if wrla_steps == 0 || n < 2 || k < 2 {
        return Ok((proposal.to_assignment()?, false));
    }
    let weights = WeightMatrix::from_log_weights(n, k, cost.iter().map(|c| -c).collect())?;
    let mutated = wrla_run(proposal.clone(), &weights, wrla_steps, rng);
    let delta = log_relative_probability(&mutated, &proposal, &weights)?;
    if mutated != proposal && rng.random::<f64>() < barker(delta) {
        Ok((mutated.to_assignment()?, true))
    } else {
        Ok((proposal.to_assignment()?, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let c = i % 2;
            let off = (i as f64 * 0.37).sin();
            pts.push(vec![20.0 * c as f64 + off, off * 0.5]);
            truth.push(c);
        }
        (pts, truth)
    }

    #[test]
    fn zero_steps_returns_the_mode() {
        let (pts, truth) = blobs();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let prior = NiwParams::new(DVector::from_vec(vec![10.0, 0.0]), 0.01, DMatrix::identity(2, 2), 5.0).unwrap();
        let cost = cost_matrix(&refs, &truth, 2, &prior).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (z, accepted) = update_attribute_z(&cost, &[15, 15], 0, &mut rng).unwrap();
        assert!(!accepted);
        assert_eq!(z, truth);
        assert_eq!(mode_labels(&cost, &[15, 15]).unwrap(), truth);
    }

    #[test]
    fn occupancy_is_preserved() {
        let (pts, truth) = blobs();
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let prior = NiwParams::new(DVector::from_vec(vec![10.0, 0.0]), 0.01, DMatrix::identity(2, 2), 5.0).unwrap();
        let cost = cost_matrix(&refs, &truth, 3, &prior).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in [[10, 15, 5], [0, 30, 0], [14, 14, 2]] {
            for _ in 0..20 {
                let (z, _) = update_attribute_z(&cost, &m, 200, &mut rng).unwrap();
                let mut counts = [0; 3];
                z.iter().for_each(|&l| counts[l] += 1);
                assert_eq!(counts, m);
            }
        }
    }
}
