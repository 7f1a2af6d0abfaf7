//! Posterior summaries of a stored trace.

use std::collections::BTreeMap;

use num_rational::Ratio;

use crate::error::{invalid, Result};
use crate::metrics::{fair_score, DEFAULT_CLUSTER_CAP};
use crate::model::dataset::LabeledDataset;
use crate::sampler::{ChainTrace, TraceSample};

/// Symmetric `N×N` co-clustering frequencies with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AssociationMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

fn assignments(trace: &ChainTrace) -> Result<Vec<&[usize]>> {
    if trace.is_empty() {
        return invalid("trace holds no samples");
    }
    let v: Vec<&[usize]> = trace.samples.iter().map(|s| s.assignment.as_slice()).collect();
    let n = v[0].len();
    if v.iter().any(|a| a.len() != n) {
        return invalid("samples disagree on the number of observations");
    }
    Ok(v)
}

/// Mean co-clustering indicator over assignments, accumulated as counts.
pub fn pairwise_probability_of(samples: &[&[usize]]) -> Result<AssociationMatrix> {
    let Some(first) = samples.first() else {
        return invalid("no samples to summarize");
    };
    let n = first.len();
    let mut counts = vec![0u32; n * n];
    for z in samples {
        for i in 0..n {
            for j in i..n {
                if z[i] == z[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let s = samples.len() as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = counts[i * n + j] as f64 / s;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(AssociationMatrix { n, values })
}

pub fn pairwise_probability(trace: &ChainTrace) -> Result<AssociationMatrix> {
    pairwise_probability_of(&assignments(trace)?)
}

/// Index of the sample whose co-clustering matrix is closest to the mean in
/// squared distance; the earliest wins ties.
pub fn dahl_index(samples: &[&[usize]]) -> Result<usize> {
    let mean = pairwise_probability_of(samples)?;
    let n = mean.n;
    let mut best = (0, f64::INFINITY);
    for (s, z) in samples.iter().enumerate() {
        let mut dist = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let e = if z[i] == z[j] { 1.0 } else { 0.0 } - mean.get(i, j);
                dist += e * e;
            }
        }
        if dist < best.1 {
            best = (s, dist);
        }
    }
    Ok(best.0)
}

/// Dahl's least-squares configuration; always one of the stored samples.
pub fn dahl_least_squares(trace: &ChainTrace) -> Result<(usize, &TraceSample)> {
    let i = dahl_index(&assignments(trace)?)?;
    Ok((i, &trace.samples[i]))
}

/// Best stored sample by fair-score.
#[derive(Clone, Debug, PartialEq)]
pub enum MapOutcome {
    Found { index: usize, score: f64 },
    /// Every sample lies outside the ε-balanced set.
    NoFeasibleSample,
}

/// Scores each sample against its own protected labels when these were
/// resampled, and against the dataset's labels otherwise.
pub fn map_by_fair_score(trace: &ChainTrace, dataset: &LabeledDataset<f64>, epsilon: f64) -> Result<MapOutcome> {
    assignments(trace)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in trace.samples.iter().enumerate() {
        let score = match &s.attributes {
            Some(a) => fair_score(&s.assignment, &dataset.relabeled(a.clone())?, epsilon, DEFAULT_CLUSTER_CAP)?,
            None => fair_score(&s.assignment, dataset, epsilon, DEFAULT_CLUSTER_CAP)?,
        };
        if score == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    Ok(match best {
        Some((index, score)) => MapOutcome::Found { index, score },
        None => MapOutcome::NoFeasibleSample,
    })
}

/// Exact frequencies of the effective number of clusters across samples.
pub fn cluster_count_posterior(trace: &ChainTrace) -> Result<BTreeMap<usize, Ratio<usize>>> {
    assignments(trace)?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &trace.samples {
        *counts.entry(s.state.effective_clusters()).or_default() += 1;
    }
    let total = trace.len();
    Ok(counts.into_iter().map(|(k, c)| (k, Ratio::new(c, total))).collect())
}

/// Most frequent effective cluster count; the smallest wins ties.
pub fn modal_cluster_count(posterior: &BTreeMap<usize, Ratio<usize>>) -> Option<usize> {
    let mut best: Option<(usize, Ratio<usize>)> = None;
    for (&k, &p) in posterior {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((k, p));
        }
    }
    best.map(|b| b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChainState;

    fn sample(assignment: Vec<usize>, k: usize) -> TraceSample {
        let mut m = vec![0; k];
        assignment.iter().for_each(|&l| m[l] += 1);
        TraceSample {
            state: ChainState {
                alpha0: 1.0,
                beta: vec![1.0 / k as f64; k],
                w: vec![vec![1.0 / k as f64; k]],
                m: vec![m],
                z: vec![assignment.clone()],
            },
            assignment,
            attributes: None,
        }
    }

    fn trace(samples: Vec<TraceSample>) -> ChainTrace {
        ChainTrace { samples, ..Default::default() }
    }

    #[test]
    fn association_examples() {
        let t = trace(vec![sample(vec![0, 0, 1], 3)]);
        let a = pairwise_probability(&t).unwrap();
        assert_eq!((a.get(0, 1), a.get(0, 2), a.get(1, 2), a.get(2, 2)), (1.0, 0.0, 0.0, 1.0));
        // {12|3} and {13|2}
        let t = trace(vec![sample(vec![0, 0, 1], 2), sample(vec![1, 0, 1], 2)]);
        let a = pairwise_probability(&t).unwrap();
        assert_eq!((a.get(0, 1), a.get(0, 2), a.get(1, 2)), (0.5, 0.5, 0.0));
        assert_eq!(a.get(1, 0), a.get(0, 1));
    }

    #[test]
    fn association_ignores_label_names() {
        let a = pairwise_probability(&trace(vec![sample(vec![0, 0, 1, 2], 3), sample(vec![2, 1, 1, 0], 3)])).unwrap();
        let b = pairwise_probability(&trace(vec![sample(vec![2, 2, 0, 1], 3), sample(vec![0, 1, 1, 2], 3)])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dahl_prefers_the_duplicated_configuration() {
        let t = trace(vec![sample(vec![0, 1, 1, 0], 2), sample(vec![0, 0, 1, 1], 2), sample(vec![1, 1, 0, 0], 2)]);
        let (i, s) = dahl_least_squares(&t).unwrap();
        assert_eq!(i, 1);
        assert_eq!(s, &t.samples[1]);
        let single = trace(vec![sample(vec![0, 1], 2)]);
        assert_eq!(dahl_least_squares(&single).unwrap().0, 0);
    }

    #[test]
    fn cluster_counts_are_exact() {
        let t = trace(vec![sample(vec![0, 1, 1], 3), sample(vec![0, 0, 1], 3), sample(vec![0, 1, 2], 3)]);
        let p = cluster_count_posterior(&t).unwrap();
        assert_eq!(p[&2], Ratio::new(2, 3));
        assert_eq!(p[&3], Ratio::new(1, 3));
        assert_eq!(p.values().copied().sum::<Ratio<usize>>(), Ratio::from_integer(1));
        assert_eq!(modal_cluster_count(&p), Some(2));
    }

    #[test]
    fn empty_trace_is_rejected() {
        let t = ChainTrace::default();
        assert!(pairwise_probability(&t).is_err());
        assert!(dahl_least_squares(&t).is_err());
        assert!(cluster_count_posterior(&t).is_err());
    }

    #[test]
    fn infeasible_everywhere() {
        // three points, two levels: exact independence is impossible for a non-trivial split
        let ds = LabeledDataset::new(vec![0.0, 1.0, 5.0], 1, vec![0, 1, 0], 2).unwrap();
        let t = trace(vec![sample(vec![0, 0, 1], 2), sample(vec![0, 1, 1], 2)]);
        assert_eq!(map_by_fair_score(&t, &ds, 0.0).unwrap(), MapOutcome::NoFeasibleSample);
    }
}
