//! Data-driven starting state and default priors.
//!
//! Each attribute level is clustered by k-means++ seeded Lloyd iterations for
//! every `k ≤ K`, and `k` is chosen by BIC of the fitted Gaussian mixture;
//! the largest choice over levels is then fitted in every level. Clusters are
//! matched across levels by ranking centroids along the leading principal
//! direction of the pooled data. Occupancies, weights and `β` are read off
//! those labels and `α0` starts at its prior mean `g/b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::Result;
use crate::linalg::GaussianLogDensity;
use crate::model::dataset::{moments, LabeledDataset};
use crate::model::niw::NiwParams;
use crate::model::state::{ChainState, HfdpConfig};

/// Pseudo-count added to every cluster when turning initial occupancies into weights.
pub const INIT_PSEUDO_COUNT: f64 = 1e-3;

const RESTARTS: usize = 5;
const LLOYD_ITERATIONS: usize = 100;

/// One weakly informative NIW prior per attribute level, centred on that level's points.
pub fn default_niw_priors(dataset: &LabeledDataset<f64>) -> Result<Vec<NiwParams<f64>>> {
    (0..dataset.levels())
        .map(|a| {
            let (mean, cov) = dataset.attribute_moments(a);
            NiwParams::weakly_informative(mean, &cov)
        })
        .collect()
}

/// Labels and squared-error objective of the best of several k-means++ restarts.
pub fn kmeans<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let (labels, sse) = lloyd(points, seed_centres(points, k, rng));
        if best.as_ref().is_none_or(|b| sse < b.1) {
            best = Some((labels, sse));
        }
    }
    best.expect("at least one restart")
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centres<R: Rng + ?Sized>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centres = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut pick = rng.random::<f64>() * total;
            d2.iter().position(|&d| {
                pick -= d;
                pick < 0.0
            })
            .unwrap_or(points.len() - 1)
        };
        centres.push(points[next].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centres.last().unwrap()));
        }
    }
    centres
}

fn lloyd(points: &[&[f64]], mut centres: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let mut labels = vec![0; points.len()];
    for iter in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            for (j, c) in centres.iter().enumerate().skip(1) {
                if sq_dist(p, c) < sq_dist(p, &centres[best]) {
                    best = j;
                }
            }
            if labels[i] != best || iter == 0 {
                changed |= labels[i] != best;
                labels[i] = best;
            }
        }
        for (j, c) in centres.iter_mut().enumerate() {
            let members: Vec<&[f64]> = points.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(p, _)| *p).collect();
            if !members.is_empty() {
                for t in 0..dim {
                    c[t] = members.iter().map(|p| p[t]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }
    let sse = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centres[l])).sum();
    (labels, sse)
}

/// BIC of the Gaussian mixture fitted to k-means labels; `None` when some
/// cluster is too small to carry its own covariance.
pub fn mixture_bic(points: &[&[f64]], labels: &[usize], k: usize) -> Option<f64> {
    let n = points.len();
    let d = points[0].len();
    let (_, pooled) = moments(points, d);
    let ridge = 1e-6 * (pooled.trace() / d as f64).max(f64::MIN_POSITIVE);
    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let members: Vec<&[f64]> = points.iter().zip(labels).filter(|(_, &l)| l == j).map(|(p, _)| *p).collect();
        if members.len() < d + 2 {
            return None;
        }
        let (mean, cov) = moments(&members, d);
        let dens = GaussianLogDensity::new(mean, &(cov + DMatrix::identity(d, d) * ridge))?;
        comps.push(((members.len() as f64 / n as f64).ln(), dens));
    }
    let ll: f64 = points
        .iter()
        .map(|p| {
            let terms: Vec<f64> = comps.iter().map(|(lw, dens)| lw + dens.ln_pdf(p)).collect();
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        })
        .sum();
    let params = k * (d + d * (d + 1) / 2) + (k - 1);
    Some(-2.0 * ll + params as f64 * (n as f64).ln())
}

/// Number of clusters BIC prefers for one point cloud, between 1 and `k_max`.
pub fn select_cluster_count<R: Rng + ?Sized>(points: &[&[f64]], k_max: usize, rng: &mut R) -> usize {
    let mut best = (1, f64::INFINITY);
    for k in 1..=k_max.min(points.len()) {
        let (labels, _) = kmeans(points, k, rng);
        if let Some(bic) = mixture_bic(points, &labels, k) {
            if bic < best.1 {
                best = (k, bic);
            }
        }
    }
    best.0
}

/// Starting state for the sampler; see the module notes.
pub fn initial_state<R: Rng + ?Sized>(
    dataset: &LabeledDataset<f64>,
    config: &HfdpConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let k = config.k;
    let levels = dataset.levels();
    let d = dataset.dim();
    let per_level: Vec<Vec<&[f64]>> = (0..levels).map(|a| dataset.attribute_points(a)).collect();
    let k_hat = per_level.iter().map(|pts| select_cluster_count(pts, k, rng)).max().unwrap_or(1);

    let all: Vec<&[f64]> = (0..dataset.len()).map(|i| dataset.point(i)).collect();
    let (_, cov) = moments(&all, d);
    let eig = SymmetricEigen::new(cov);
    let lead = eig.eigenvalues.imax();
    let direction: DVector<f64> = eig.eigenvectors.column(lead).into_owned();

    let mut z = Vec::with_capacity(levels);
    let mut m = Vec::with_capacity(levels);
    let mut w = Vec::with_capacity(levels);
    for pts in &per_level {
        let (labels, _) = kmeans(pts, k_hat.min(pts.len()), rng);
        let kk = labels.iter().max().map_or(1, |x| x + 1);
        let mut proj = vec![(0.0, 0usize); kk];
        let mut counts = vec![0usize; kk];
        for (p, &l) in pts.iter().zip(&labels) {
            proj[l].0 += p.iter().zip(direction.iter()).map(|(a, b)| a * b).sum::<f64>();
            counts[l] += 1;
        }
        for (j, pr) in proj.iter_mut().enumerate() {
            pr.0 /= counts[j].max(1) as f64;
            pr.1 = j;
        }
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rank = vec![0; kk];
        for (pos, &(_, j)) in proj.iter().enumerate() {
            rank[j] = pos;
        }
        let za: Vec<usize> = labels.iter().map(|&l| rank[l]).collect();
        let mut ma = vec![0usize; k];
        za.iter().for_each(|&l| ma[l] += 1);
        let n = pts.len() as f64;
        w.push(ma.iter().map(|&c| (c as f64 + INIT_PSEUDO_COUNT) / (n + k as f64 * INIT_PSEUDO_COUNT)).collect::<Vec<_>>());
        m.push(ma);
        z.push(za);
    }
    let beta: Vec<f64> = (0..k).map(|j| w.iter().map(|wa| wa[j]).sum::<f64>() / levels as f64).collect();
    let state = ChainState { alpha0: config.g / config.b, beta, w, m, z };
    state.check_invariants(&dataset.sizes())?;
    Ok(state)
}
