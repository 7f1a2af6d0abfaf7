//! Balance, the mutual-information pivot, ε-balance membership and the
//! empirical fair-score of a clustering.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HfdpError, Result};
use crate::linalg::{symmetrize, GaussianLogDensity};
use crate::model::dataset::{moments, LabeledDataset};
use crate::scalar::{lit, neg_infinity, Scalar};

/// Largest cluster label count accepted by default when `K` is inferred from an assignment.
pub const DEFAULT_CLUSTER_CAP: usize = 1000;

/// `r×K` counts `N_{a,k}` with cached marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    row_totals: Vec<usize>,
    col_totals: Vec<usize>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<usize>>) -> Result<Self> {
        let k = counts.first().map_or(0, Vec::len);
        if counts.is_empty() || k == 0 {
            return invalid("contingency table needs at least one row and one column");
        }
        if counts.iter().any(|row| row.len() != k) {
            return invalid("contingency table rows differ in length");
        }
        let row_totals: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_totals: Vec<usize> = (0..k).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        let total = row_totals.iter().sum();
        Ok(Self { counts, row_totals, col_totals, total })
    }

    /// Cross-tabulates attribute labels against cluster labels (both 0-based).
    pub fn from_labels(attributes: &[usize], clusters: &[usize], levels: usize, k: usize) -> Result<Self> {
        if attributes.len() != clusters.len() {
            return invalid("attribute and cluster label vectors differ in length");
        }
        let mut counts = vec![vec![0; k]; levels];
        for (&a, &z) in attributes.iter().zip(clusters) {
            if a >= levels || z >= k {
                return invalid(format!("label ({a}, {z}) outside the {levels}×{k} table"));
            }
            counts[a][z] += 1;
        }
        Self::new(counts)
    }

    /// Table of a dataset-order assignment, with `K` inferred as `max label + 1`.
    pub fn from_assignment<T: Scalar>(dataset: &LabeledDataset<T>, z: &[usize], cluster_cap: usize) -> Result<Self> {
        if z.len() != dataset.len() {
            return invalid(format!("assignment has {} labels for {} observations", z.len(), dataset.len()));
        }
        let k = z.iter().max().map_or(1, |m| m + 1);
        if k > cluster_cap {
            return invalid(format!("assignment uses {k} clusters, above the cap of {cluster_cap}"));
        }
        Self::from_labels(dataset.labels(), z, dataset.levels(), k)
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn clusters(&self) -> usize {
        self.col_totals.len()
    }

    pub fn row_totals(&self) -> &[usize] {
        &self.row_totals
    }

    pub fn col_totals(&self) -> &[usize] {
        &self.col_totals
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Per-cluster balance (`None` for empty clusters) and the overall minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct Balance {
    pub per_cluster: Vec<Option<f64>>,
    pub overall: f64,
}

/// Ratio of the rarest to the most frequent attribute level inside each cluster.
/// A cluster missing some level scores 0; a single level counts as balanced.
pub fn balance(table: &ContingencyTable) -> Result<Balance> {
    let mut per_cluster = Vec::with_capacity(table.clusters());
    let mut overall: Option<f64> = None;
    for k in 0..table.clusters() {
        if table.col_totals[k] == 0 {
            per_cluster.push(None);
            continue;
        }
        let column = table.counts.iter().map(|row| row[k]);
        let lo = column.clone().min().unwrap_or(0);
        let hi = column.max().unwrap_or(0);
        let b = lo as f64 / hi as f64;
        overall = Some(overall.map_or(b, |o| o.min(b)));
        per_cluster.push(Some(b));
    }
    match overall {
        Some(overall) => Ok(Balance { per_cluster, overall }),
        None => invalid("every cluster is empty"),
    }
}

/// `KL(p_A p_Z || p_AZ)` of the empirical proportions; `+∞` when a joint cell is
/// empty while both of its marginals are positive.
pub fn mi_pivot(table: &ContingencyTable) -> f64 {
    if table.total == 0 {
        return 0.0;
    }
    let n = table.total as f64;
    let mut acc = 0.0;
    for (a, row) in table.counts.iter().enumerate() {
        let pa = table.row_totals[a] as f64 / n;
        for (k, &c) in row.iter().enumerate() {
            let prod = pa * table.col_totals[k] as f64 / n;
            if prod == 0.0 {
                continue;
            }
            if c == 0 {
                return f64::INFINITY;
            }
            acc += prod * (prod / (c as f64 / n)).ln();
        }
    }
    acc.max(0.0)
}

/// Membership of the ε-balanced set: `mi_pivot ≤ ε`.
pub fn epsilon_fair(table: &ContingencyTable, epsilon: f64) -> bool {
    mi_pivot(table) <= epsilon
}

/// [`epsilon_fair`] on a dataset-order assignment.
pub fn epsilon_fair_set_check<T: Scalar>(z: &[usize], dataset: &LabeledDataset<T>, epsilon: f64) -> Result<bool> {
    Ok(epsilon_fair(&ContingencyTable::from_assignment(dataset, z, DEFAULT_CLUSTER_CAP)?, epsilon))
}

/// Empirical fair-score: `−∞` outside the ε-balanced set, otherwise the
/// plug-in log joint of cluster proportions, Gaussian component fits and
/// attribute proportions.
pub fn fair_score<T: Scalar>(
    z: &[usize],
    dataset: &LabeledDataset<T>,
    epsilon: f64,
    cluster_cap: usize,
) -> Result<T> {
    let table = ContingencyTable::from_assignment(dataset, z, cluster_cap)?;
    if !epsilon_fair(&table, epsilon) {
        return Ok(neg_infinity());
    }
    let n = dataset.len() as f64;
    let d = dataset.dim();
    let mut score = T::zero();
    for a in 0..dataset.levels() {
        let n_a = table.row_totals[a] as f64;
        score += lit::<T>(n_a * (n_a / n).ln());
        for &c in &table.counts[a] {
            if c > 0 {
                score += lit::<T>(c as f64 * (c as f64 / n_a).ln());
            }
        }

        let idx = dataset.index(a);
        let (_, pooled) = dataset.attribute_moments(a);
        let ridge = lit::<T>(1e-6) * pooled.trace() / lit::<T>(d as f64);
        let mut members: Vec<Vec<&[T]>> = vec![Vec::new(); table.clusters()];
        for &i in idx {
            members[z[i]].push(dataset.point(i));
        }
        for (k, pts) in members.iter().enumerate() {
            if pts.is_empty() {
                continue;
            }
            let (mean, cov) = moments(pts, d);
            let cov = if pts.len() < d + 2 { pooled.clone() } else { cov };
            let density = ridged_density(mean, &cov, ridge)
                .ok_or_else(|| HfdpError::NumericalDegeneracy(format!("singular covariance for attribute {a}, cluster {k}")))?;
            for p in pts {
                score += density.ln_pdf(p);
            }
        }
    }
    Ok(score)
}

fn ridged_density<T: Scalar>(mean: DVector<T>, cov: &DMatrix<T>, ridge: T) -> Option<GaussianLogDensity<T>> {
    let d = cov.nrows();
    GaussianLogDensity::new(mean, &(symmetrize(cov) + DMatrix::<T>::identity(d, d) * ridge))
}

/// Everything reported about one clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Balance per cluster; `None` for empty clusters.
    pub cluster_balance: Vec<Option<f64>>,
    pub balance: f64,
    pub mi: f64,
    pub epsilon: f64,
    pub epsilon_ok: bool,
    pub fair_score: f64,
}

pub fn fairness_report<T: Scalar>(
    z: &[usize],
    dataset: &LabeledDataset<T>,
    epsilon: f64,
    cluster_cap: usize,
) -> Result<FairnessReport> {
    let table = ContingencyTable::from_assignment(dataset, z, cluster_cap)?;
    let bal = balance(&table)?;
    let mi = mi_pivot(&table);
    let score = fair_score(z, dataset, epsilon, cluster_cap)?;
    Ok(FairnessReport {
        cluster_balance: bal.per_cluster,
        balance: bal.overall,
        mi,
        epsilon,
        epsilon_ok: mi <= epsilon,
        fair_score: crate::scalar::to_f64(score),
    })
}

/// Adjusted Rand index between two partitions of the same points.
pub fn adjusted_rand_index(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid("partitions differ in length");
    }
    let n = x.len();
    if n < 2 {
        return Ok(1.0);
    }
    let kx = x.iter().max().map_or(0, |m| m + 1);
    let ky = y.iter().max().map_or(0, |m| m + 1);
    let mut cells = vec![vec![0usize; ky]; kx];
    for (&a, &b) in x.iter().zip(y) {
        cells[a][b] += 1;
    }
    let pairs = |c: usize| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = cells.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = cells.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..ky).map(|j| pairs(cells.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / pairs(n);
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < 1e-12 {
        return Ok(if (index - expected).abs() < 1e-12 { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
