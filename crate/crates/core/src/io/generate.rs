//! Synthetic designs: Gaussian, Student-t and skew-normal two-cluster data,
//! a four-level variant, and imperfectly observed protected labels.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HfdpError, Result};
use crate::model::dataset::LabeledDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    A1,
    A2,
    A3,
    B,
    Imperfect,
}

impl std::str::FromStr for Design {
    type Err = HfdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" | "A.1" => Ok(Self::A1),
            "A2" | "A.2" => Ok(Self::A2),
            "A3" | "A.3" => Ok(Self::A3),
            "B" => Ok(Self::B),
            "IMPERFECT" => Ok(Self::Imperfect),
            other => invalid(format!("unknown design '{other}'")),
        }
    }
}

/// Component family of a design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    StudentT { df: f64 },
    SkewNormal { alpha: [f64; 2] },
}

/// Complete description of a synthetic dataset; [`GeneratorSpec::new`] fills in the standard defaults of each design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub design: Design,
    pub family: Family,
    /// `means[a][k]`: centre of cluster `k` for attribute level `a`.
    pub means: Vec<Vec<Vec<f64>>>,
    /// `sizes[a][k]`: number of points of level `a` in cluster `k`.
    pub sizes: Vec<Vec<usize>>,
    /// Common scale matrix `S = scale·[ρ 11ᵀ + (1−ρ) I]`.
    pub scale: f64,
    pub rho: f64,
    /// Probability of keeping each observed protected label (imperfect design only).
    pub p_acc: Option<f64>,
}

impl GeneratorSpec {
    pub fn new(design: Design) -> Self {
        let two = vec![
            vec![vec![4.0, 4.0], vec![10.0, 10.0]],
            vec![vec![2.0, 2.0], vec![8.0, 8.0]],
        ];
        let (family, means) = match design {
            Design::A1 | Design::Imperfect => (Family::Gaussian, two),
            Design::A2 => (Family::StudentT { df: 4.0 }, two),
            Design::A3 => (Family::SkewNormal { alpha: [1.0, 1.0] }, two),
            Design::B => (
                Family::Gaussian,
                [(4.0, 10.0), (2.0, 8.0), (0.0, 6.0), (-2.0, 4.0)]
                    .iter()
                    .map(|&(c1, c2)| vec![vec![c1, c1], vec![c2, c2]])
                    .collect(),
            ),
        };
        let sizes = vec![vec![100, 100]; means.len()];
        let p_acc = (design == Design::Imperfect).then_some(0.9);
        Self { design, family, means, sizes, scale: 3.0, rho: 0.3, p_acc }
    }

    pub fn with_p_acc(mut self, p_acc: f64) -> Self {
        self.p_acc = Some(p_acc);
        self
    }

    pub fn scale_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.scale * if i == j { 1.0 } else { self.rho })
    }

    pub fn dim(&self) -> usize {
        self.means[0][0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() < 2 || self.means.len() != self.sizes.len() {
            return invalid("need at least two attribute levels with matching sizes");
        }
        let d = self.dim();
        let k = self.means[0].len();
        for (a, (m, s)) in self.means.iter().zip(&self.sizes).enumerate() {
            if m.len() != k || s.len() != k || m.iter().any(|mu| mu.len() != d) {
                return invalid(format!("level {a} has inconsistent means or sizes"));
            }
            if s.iter().sum::<usize>() == 0 {
                return invalid(format!("level {a} has no points"));
            }
        }
        if !(self.scale > 0.0) || !(self.rho > -1.0 / (d as f64 - 1.0).max(1.0) && self.rho < 1.0) {
            return invalid("scale matrix is not positive definite");
        }
        if let Family::StudentT { df } = self.family {
            if !(df > 0.0) {
                return invalid("degrees of freedom must be positive");
            }
        }
        if let Family::SkewNormal { .. } = self.family {
            if d != 2 {
                return invalid("the skew-normal family is defined here for two features");
            }
        }
        if let Some(p) = self.p_acc {
            if !(0.0..=1.0).contains(&p) {
                return invalid("p_acc must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Clone, Debug)]
pub struct Generated {
    /// Observed data; protected labels are the swapped ones in the imperfect design.
    pub dataset: LabeledDataset<f64>,
    /// True cluster of each row.
    pub truth: Vec<usize>,
    /// True protected label of each row.
    pub true_attributes: Vec<usize>,
}

/// Rows are grouped by observed level, then by true level and cluster.
pub fn generate<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Generated> {
    spec.validate()?;
    let d = spec.dim();
    let s = spec.scale_matrix();
    let chol = Cholesky::new(s.clone()).ok_or_else(|| HfdpError::InvalidInput("scale matrix is not positive definite".into()))?;
    let l = chol.l();
    let skew = match spec.family {
        Family::SkewNormal { alpha } => Some(SkewNormal::new(&s, &alpha)?),
        _ => None,
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut truth = Vec::new();
    for (a, (means, sizes)) in spec.means.iter().zip(&spec.sizes).enumerate() {
        for (k, (mu, &n)) in means.iter().zip(sizes).enumerate() {
            for _ in 0..n {
                let eps: DVector<f64> = match (&spec.family, &skew) {
                    (Family::Gaussian, _) => &l * normal(d, rng),
                    (Family::StudentT { df }, _) => {
                        let chi = ChiSquared::new(*df).map_err(|e| HfdpError::InvalidInput(e.to_string()))?;
                        let w: f64 = chi.sample(rng);
                        (&l * normal(d, rng)) / (w / df).sqrt()
                    }
                    (Family::SkewNormal { .. }, Some(sn)) => sn.sample(rng),
                    (Family::SkewNormal { .. }, None) => unreachable!("skew-normal sampler is built above"),
                };
                points.extend(mu.iter().zip(eps.iter()).map(|(m, e)| m + e));
                labels.push(a);
                truth.push(k);
            }
        }
    }
    let levels = spec.means.len();
    let true_attributes = labels.clone();
    if let Some(p) = spec.p_acc {
        for lab in labels.iter_mut() {
            if rng.random::<f64>() >= p {
                let shift = rng.random_range(1..levels);
                *lab = (*lab + shift) % levels;
            }
        }
    }
    // group rows by observed level so levels first appear in index order
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    let points: Vec<f64> = order.iter().flat_map(|&i| points[i * d..(i + 1) * d].iter().copied()).collect();
    let pick = |v: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let (labels, truth, true_attributes) = (pick(&labels), pick(&truth), pick(&true_attributes));
    let dataset = LabeledDataset::new(points, d, labels, levels)?;
    Ok(Generated { dataset, truth, true_attributes })
}

fn normal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

/// Azzalini skew-normal with scale `Ω` and shape `α`, sampled by drawing
/// `(X0, X)` jointly Gaussian with `Cov(X0, X) = δ` and returning `±X` by the sign of `X0`.
struct SkewNormal {
    joint: DMatrix<f64>,
    omega: DVector<f64>,
}

impl SkewNormal {
    fn new(scale: &DMatrix<f64>, alpha: &[f64]) -> Result<Self> {
        let d = scale.nrows();
        let omega = DVector::from_iterator(d, (0..d).map(|i| scale[(i, i)].sqrt()));
        let corr = DMatrix::from_fn(d, d, |i, j| scale[(i, j)] / (omega[i] * omega[j]));
        let a = DVector::from_column_slice(alpha);
        let q = (a.transpose() * &corr * &a)[(0, 0)];
        let delta = (&corr * &a) / (1.0 + q).sqrt();
        let mut big = DMatrix::<f64>::identity(d + 1, d + 1);
        big.view_mut((1, 1), (d, d)).copy_from(&corr);
        for i in 0..d {
            big[(0, i + 1)] = delta[i];
            big[(i + 1, 0)] = delta[i];
        }
        let joint = Cholesky::new(big)
            .ok_or_else(|| HfdpError::InvalidInput("skew-normal joint covariance is not positive definite".into()))?
            .l();
        Ok(Self { joint, omega })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.omega.len();
        let y = &self.joint * normal(d + 1, rng);
        let sign = if y[0] > 0.0 { 1.0 } else { -1.0 };
        DVector::from_iterator(d, (0..d).map(|i| sign * y[i + 1] * self.omega[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cluster_mean(g: &Generated, a: usize, k: usize) -> Vec<f64> {
        let rows: Vec<usize> = (0..g.dataset.len()).filter(|&i| g.true_attributes[i] == a && g.truth[i] == k).collect();
        (0..2).map(|j| rows.iter().map(|&i| g.dataset.point(i)[j]).sum::<f64>() / rows.len() as f64).collect()
    }

    #[test]
    fn a1_is_reproducible_and_centred() {
        let spec = GeneratorSpec::new(Design::A1);
        let g1 = generate(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let g2 = generate(&spec, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(g1.dataset.raw_points(), g2.dataset.raw_points());
        assert_eq!(g1.dataset.len(), 400);
        assert_eq!(g1.dataset.sizes(), vec![200, 200]);
        let m = cluster_mean(&g1, 0, 0);
        assert!((m[0] - 4.0).abs() < 0.3 && (m[1] - 4.0).abs() < 0.3, "{m:?}");
    }

    #[test]
    fn imperfect_with_full_accuracy_matches_a1() {
        let a1 = generate(&GeneratorSpec::new(Design::A1), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let imp = generate(&GeneratorSpec::new(Design::Imperfect).with_p_acc(1.0), &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a1.dataset.labels(), imp.dataset.labels());
        assert_eq!(a1.dataset.raw_points(), imp.dataset.raw_points());
    }

    #[test]
    fn imperfect_swaps_about_one_in_ten() {
        let mut spec = GeneratorSpec::new(Design::Imperfect);
        spec.sizes = vec![vec![2500, 2500]; 2];
        let g = generate(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let swapped = g.dataset.labels().iter().zip(&g.true_attributes).filter(|(a, b)| a != b).count();
        assert!((swapped as f64 / 10_000.0 - 0.1).abs() < 0.01);
    }

    #[test]
    fn design_b_has_four_levels() {
        let g = generate(&GeneratorSpec::new(Design::B), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_eq!(g.dataset.levels(), 4);
        assert_eq!(g.dataset.sizes(), vec![200; 4]);
        let m = cluster_mean(&g, 3, 1);
        assert!((m[0] - 4.0).abs() < 0.4);
    }

    #[test]
    fn heavy_tails_and_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut spec = GeneratorSpec::new(Design::A3);
        spec.sizes = vec![vec![20_000, 0], vec![1, 0]];
        let g = generate(&spec, &mut rng).unwrap();
        // skew-normal mean is μ + ω δ sqrt(2/π)
        let m = cluster_mean(&g, 0, 0);
        let corr_a = 1.3;
        let q = 2.0 * corr_a;
        let shift = 3.0_f64.sqrt() * corr_a / (1.0 + q).sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        assert!((m[0] - 4.0 - shift).abs() < 0.05, "{m:?} vs {shift}");

        let mut spec = GeneratorSpec::new(Design::A2);
        spec.sizes = vec![vec![20_000, 0], vec![1, 0]];
        let g = generate(&spec, &mut rng).unwrap();
        let xs: Vec<f64> = (0..20_000).map(|i| g.dataset.point(i)[0] - 4.0).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        // t_4 variance is S·df/(df−2) = 6
        assert!((var / 6.0 - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn parses_design_tags() {
        assert_eq!("a1".parse::<Design>().unwrap(), Design::A1);
        assert_eq!("imperfect".parse::<Design>().unwrap(), Design::Imperfect);
        assert!("C".parse::<Design>().is_err());
    }
}
