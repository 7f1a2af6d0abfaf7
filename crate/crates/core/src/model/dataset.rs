use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::scalar::{lit, Scalar};

/// Observations with a protected-attribute label each.
///
/// Points are stored row-major (`N × d`). Labels are 0-based levels in `0..levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T: Scalar> {
    points: Vec<T>,
    dim: usize,
    labels: Vec<usize>,
    levels: usize,
    per_attribute_index: Vec<Vec<usize>>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(points: Vec<T>, dim: usize, labels: Vec<usize>, levels: usize) -> Result<Self> {
        if dim == 0 {
            return invalid("feature dimension must be at least 1");
        }
        if points.len() != dim * labels.len() {
            return invalid(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                points.len(),
                labels.len()
            ));
        }
        if levels == 0 {
            return invalid("at least one attribute level is required");
        }
        if let Some((i, &a)) = labels.iter().enumerate().find(|(_, &a)| a >= levels) {
            return invalid(format!("label {a} of row {i} outside 0..{levels}"));
        }
        let per_attribute_index = build_index(&labels, levels);
        if let Some(a) = per_attribute_index.iter().position(|idx| idx.is_empty()) {
            return invalid(format!("attribute level {a} has no observations"));
        }
        Ok(Self { points, dim, labels, levels, per_attribute_index })
    }

    /// Builds a dataset from per-row vectors.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<usize>, levels: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("rows have inconsistent dimension");
        }
        Self::new(rows.concat(), dim, labels, levels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn raw_points(&self) -> &[T] {
        &self.points
    }

    /// Row indices carrying attribute level `a`, in dataset order.
    pub fn index(&self, a: usize) -> &[usize] {
        &self.per_attribute_index[a]
    }

    /// `N_a` for every level.
    pub fn sizes(&self) -> Vec<usize> {
        self.per_attribute_index.iter().map(Vec::len).collect()
    }

    /// Points of level `a` in index order.
    pub fn attribute_points(&self, a: usize) -> Vec<&[T]> {
        self.per_attribute_index[a].iter().map(|&i| self.point(i)).collect()
    }

    /// Same points with new attribute labels.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(self.points.clone(), self.dim, labels, self.levels)
    }

    /// Splits a dataset-order assignment into per-attribute label vectors.
    pub fn split_assignment(&self, assignment: &[usize]) -> Vec<Vec<usize>> {
        self.per_attribute_index
            .iter()
            .map(|idx| idx.iter().map(|&i| assignment[i]).collect())
            .collect()
    }

    /// Inverse of [`split_assignment`](Self::split_assignment).
    pub fn merge_assignment(&self, z: &[Vec<usize>]) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (a, idx) in self.per_attribute_index.iter().enumerate() {
            for (pos, &i) in idx.iter().enumerate() {
                out[i] = z[a][pos];
            }
        }
        out
    }

    /// Sample mean and maximum-likelihood covariance of one level's points.
    pub fn attribute_moments(&self, a: usize) -> (DVector<T>, DMatrix<T>) {
        moments(&self.attribute_points(a), self.dim)
    }
}

fn build_index(labels: &[usize], levels: usize) -> Vec<Vec<usize>> {
    let mut idx = vec![Vec::new(); levels];
    for (i, &a) in labels.iter().enumerate() {
        if a < levels {
            idx[a].push(i);
        }
    }
    idx
}

/// Mean and (1/n) covariance of a set of points; zeros for an empty set.
pub fn moments<T: Scalar>(points: &[&[T]], dim: usize) -> (DVector<T>, DMatrix<T>) {
    let n = points.len();
    let mut mean = DVector::<T>::zeros(dim);
    let mut cov = DMatrix::<T>::zeros(dim, dim);
    if n == 0 {
        return (mean, cov);
    }
    for p in points {
        for j in 0..dim {
            mean[j] += p[j];
        }
    }
    mean /= lit::<T>(n as f64);
    for p in points {
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in 0..dim {
                cov[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    cov /= lit::<T>(n as f64);
    (mean, cov)
}
