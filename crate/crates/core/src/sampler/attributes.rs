//! Uncertain protected attributes: per-observation membership probabilities.

use rand::Rng;
use rand::distr::{weighted::WeightedIndex, Distribution};

use crate::error::{invalid, HfdpError, Result};
use crate::model::dataset::LabeledDataset;
use crate::scalar::Scalar;

/// `N×r` rows of known probabilities `p_i^(a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeBeliefs {
    rows: Vec<Vec<f64>>,
}

impl AttributeBeliefs {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.first().map_or(0, Vec::len);
        if r == 0 {
            return invalid("beliefs need at least one row and one level");
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != r {
                return invalid(format!("belief row {i} has {} levels, expected {r}", row.len()));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return invalid(format!("belief row {i} is not on the simplex"));
            }
        }
        Ok(Self { rows })
    }

    /// Probability `p_acc` on each observed label, the rest spread evenly.
    pub fn from_accuracy(observed: &[usize], levels: usize, p_acc: f64) -> Result<Self> {
        if levels < 2 || !(0.0..=1.0).contains(&p_acc) {
            return invalid("accuracy beliefs need at least two levels and p_acc in [0, 1]");
        }
        let other = (1.0 - p_acc) / (levels - 1) as f64;
        let rows = observed
            .iter()
            .map(|&a| (0..levels).map(|l| if l == a { p_acc } else { other }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

/// Redraws every attribute label from its beliefs. Fails when a level ends up empty.
pub fn resample_attributes<T: Scalar, R: Rng + ?Sized>(
    dataset: &LabeledDataset<T>,
    beliefs: &AttributeBeliefs,
    rng: &mut R,
) -> Result<LabeledDataset<T>> {
    if beliefs.len() != dataset.len() || beliefs.levels() != dataset.levels() {
        return invalid("beliefs do not match the dataset shape");
    }
    let labels = (0..dataset.len())
        .map(|i| {
            let row = beliefs.row(i);
            if let Some(a) = row.iter().position(|&p| p == 1.0) {
                return Ok(a);
            }
            WeightedIndex::new(row)
                .map(|d| d.sample(rng))
                .map_err(|e| HfdpError::InvalidInput(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    dataset.relabeled(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize, labels: Vec<usize>) -> LabeledDataset<f64> {
        LabeledDataset::new((0..n).map(|i| i as f64).collect(), 1, labels, 2).unwrap()
    }

    #[test]
    fn one_hot_beliefs_keep_labels() {
        let ds = line(6, vec![0, 1, 1, 0, 1, 0]);
        let b = AttributeBeliefs::from_accuracy(ds.labels(), 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        assert_eq!(resample_attributes(&ds, &b, &mut rng).unwrap().labels(), ds.labels());
    }

    #[test]
    fn uniform_beliefs_split_evenly() {
        let n = 10_000;
        let ds = line(n, (0..n).map(|i| i % 2).collect());
        let b = AttributeBeliefs::new(vec![vec![0.5, 0.5]; n]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = resample_attributes(&ds, &b, &mut rng).unwrap();
        let frac = out.sizes()[0] as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02);
    }

    #[test]
    fn accuracy_beliefs_flip_the_right_fraction() {
        let n = 10_000;
        let ds = line(n, (0..n).map(|i| i % 2).collect());
        let b = AttributeBeliefs::from_accuracy(ds.labels(), 2, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let out = resample_attributes(&ds, &b, &mut rng).unwrap();
        let changed = out.labels().iter().zip(ds.labels()).filter(|(a, b)| a != b).count();
        assert!((changed as f64 / n as f64 - 0.1).abs() < 0.01);
    }

    #[test]
    fn rejects_off_simplex_rows() {
        assert!(AttributeBeliefs::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(AttributeBeliefs::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }
}
