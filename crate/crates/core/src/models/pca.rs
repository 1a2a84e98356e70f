//! Principal component analysis on standardized metric vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    Components(usize),
    /// Smallest k whose cumulative explained ratio reaches this fraction.
    Variance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// Sample standard deviations (n - 1); 0 marks a dropped constant channel.
    pub sds: Vec<f64>,
    /// k rows of full input width; dropped channels carry zeros.
    pub components: Vec<Vec<f64>>,
    /// Variance of the training data along each component.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

fn is_constant(sd: f64, mean: f64) -> bool {
    sd <= 1e-12 * mean.abs().max(1.0)
}

/// Chooses k for a variance target from descending explained ratios.
pub fn components_for_variance(ratios: &[f64], fraction: f64) -> usize {
    let mut cum = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cum += r;
        if cum >= fraction {
            return i + 1;
        }
    }
    ratios.len()
}

pub fn pca_fit(x: &[Vec<f64>], target: PcaTarget) -> Result<PcaModel, ModelError> {
    let n = x.len();
    if n < 2 {
        return Err(ModelError::TooFewSamples { need: 2, got: n });
    }
    let p = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(ModelError::Dimension { expected: p, got: row.len() });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    match target {
        PcaTarget::Components(0) => return Err(ModelError::Invalid("k must be >= 1".into())),
        PcaTarget::Variance(f) if !(f > 0.0 && f <= 1.0) => {
            return Err(ModelError::Invalid(format!("variance fraction {f} outside (0, 1]")))
        }
        _ => {}
    }

    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let mut sds: Vec<f64> =
        (0..p).map(|j| (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()).collect();
    for j in 0..p {
        if is_constant(sds[j], means[j]) {
            sds[j] = 0.0;
        }
    }
    let kept: Vec<usize> = (0..p).filter(|&j| sds[j] > 0.0).collect();
    let q = kept.len();
    if q == 0 {
        return Err(ModelError::Invalid("every channel is constant".into()));
    }

    let z = DMatrix::from_fn(n, q, |i, c| {
        let j = kept[c];
        (x[i][j] - means[j]) / sds[j]
    });
    let cov = (z.transpose() * &z) / (nf - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    // the trace of a correlation matrix is the number of kept channels
    let total = q as f64;
    let ratios: Vec<f64> = values.iter().map(|v| v / total).collect();

    let k = match target {
        PcaTarget::Components(k) if k > q => {
            return Err(ModelError::Invalid(format!("k = {k} exceeds the {q} non-constant channels")))
        }
        PcaTarget::Components(k) => k,
        PcaTarget::Variance(f) => components_for_variance(&ratios, f - 1e-12),
    };

    let components = order[..k]
        .iter()
        .map(|&col| {
            let v = eig.eigenvectors.column(col);
            // sign convention: the largest-magnitude entry is positive
            let mut pivot = 0;
            for i in 1..q {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            let mut row = vec![0.0; p];
            for (c, &j) in kept.iter().enumerate() {
                row[j] = sign * v[c];
            }
            row
        })
        .collect();

    Ok(PcaModel {
        means,
        sds,
        components,
        eigenvalues: values[..k].to_vec(),
        explained_variance_ratio: ratios[..k].to_vec(),
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.means.len()
    }

    fn standardize(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, sd))| if *sd > 0.0 { (v - m) / sd } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, s: &[f64]) -> Result<Vec<f64>, ModelError> {
        if s.len() != self.input_dim() {
            return Err(ModelError::Dimension { expected: self.input_dim(), got: s.len() });
        }
        let z = self.standardize(s);
        Ok(self.components.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum()).collect())
    }

    /// Maps component scores back to a metric vector; constant channels
    /// come back at their training mean.
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>, ModelError> {
        if scores.len() != self.k() {
            return Err(ModelError::Dimension { expected: self.k(), got: scores.len() });
        }
        Ok((0..self.input_dim())
            .map(|j| {
                let z: f64 = self.components.iter().zip(scores).map(|(row, s)| row[j] * s).sum();
                self.means[j] + self.sds[j] * z
            })
            .collect())
    }

    pub fn cumulative_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        (0..n).map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn correlated(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::rng(seed);
        (0..n)
            .map(|_| {
                let f: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut rng)).collect();
                (0..63)
                    .map(|j| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        (j as f64 + 1.0) * (f[j % 4] + 0.3 * f[(j + 1) % 4]) + 0.2 * e + j as f64
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn rank_one_data() {
        let mut rng = seeds::rng(1);
        let dir: Vec<f64> = (0..63).map(|j| 1.0 + j as f64 * 0.1).collect();
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let t = rng.random::<f64>() * 10.0;
                dir.iter().map(|d| d * t + 3.0).collect()
            })
            .collect();
        let m = pca_fit(&x, PcaTarget::Components(1)).unwrap();
        assert!(m.explained_variance_ratio[0] >= 0.999);
    }

    #[test]
    fn components_are_orthonormal_and_variances_match() {
        let x = correlated(200, 3);
        let m = pca_fit(&x, PcaTarget::Components(10)).unwrap();
        for a in 0..m.k() {
            for b in 0..m.k() {
                let dot: f64 = m.components[a].iter().zip(&m.components[b]).map(|(p, q)| p * q).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8);
            }
        }
        let scores: Vec<Vec<f64>> = x.iter().map(|r| m.transform(r).unwrap()).collect();
        for c in 0..m.k() {
            let mean = scores.iter().map(|s| s[c]).sum::<f64>() / 200.0;
            let var = scores.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / 199.0;
            assert!((var - m.eigenvalues[c]).abs() <= 1e-6 * m.eigenvalues[c]);
        }
        assert!(m.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        assert!(m.cumulative_ratio() <= 1.0 + 1e-12);
    }

    #[test]
    fn variance_target_picks_smallest_k() {
        let x = correlated(150, 8);
        let full = pca_fit(&x, PcaTarget::Components(63)).unwrap();
        let m = pca_fit(&x, PcaTarget::Variance(0.95)).unwrap();
        let k = m.k();
        let cum: f64 = full.explained_variance_ratio[..k].iter().sum();
        assert!(cum >= 0.95 - 1e-12);
        let prev: f64 = full.explained_variance_ratio[..k - 1].iter().sum();
        assert!(prev < 0.95);
        assert_eq!(components_for_variance(&[0.5, 0.3, 0.2], 0.8), 2);
        assert_eq!(components_for_variance(&[0.5, 0.3, 0.2], 0.81), 3);
    }

    #[test]
    fn training_mean_maps_to_origin() {
        let x = correlated(80, 2);
        let m = pca_fit(&x, PcaTarget::Variance(0.9)).unwrap();
        let z = m.transform(&m.means).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reconstruct_then_transform_is_identity() {
        let x = correlated(80, 4);
        let m = pca_fit(&x, PcaTarget::Components(6)).unwrap();
        let z = vec![0.5, -1.0, 2.0, 0.0, 0.1, -0.3];
        let back = m.transform(&m.reconstruct(&z).unwrap()).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_channels_are_dropped() {
        let mut x = correlated(60, 5);
        for r in x.iter_mut() {
            r[10] = 16384.0;
        }
        let m = pca_fit(&x, PcaTarget::Components(5)).unwrap();
        assert_eq!(m.sds[10], 0.0);
        assert!(m.components.iter().all(|row| row[10] == 0.0));
        let mut s = x[0].clone();
        let base = m.transform(&s).unwrap();
        s[10] = 1.0;
        assert_eq!(m.transform(&s).unwrap(), base);
    }

    #[test]
    fn isotropic_ratios_near_uniform() {
        // eigenvalue spread of a Wishart sample is wide at small n, so
        // compare the average over draws to 1/63
        let draws = 30;
        let mut avg = vec![0.0; 63];
        for seed in 0..draws {
            let m = pca_fit(&gaussian(2000, 63, seed), PcaTarget::Components(63)).unwrap();
            for (a, r) in avg.iter_mut().zip(&m.explained_variance_ratio) {
                *a += r / draws as f64;
            }
            assert!((m.cumulative_ratio() - 1.0).abs() < 1e-9);
        }
        let mean_ratio = avg.iter().sum::<f64>() / 63.0;
        assert!((mean_ratio - 1.0 / 63.0).abs() < 1e-12);
        // Marchenko-Pastur edges for p/n = 0.0315: (1 +- sqrt(0.0315))^2
        let (lo, hi) = ((1.0 - 0.0315f64.sqrt()).powi(2) / 63.0, (1.0 + 0.0315f64.sqrt()).powi(2) / 63.0);
        assert!(avg[0] <= hi * 1.05 && avg[62] >= lo * 0.95, "{} {}", avg[0], avg[62]);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(pca_fit(&[vec![1.0, 2.0]], PcaTarget::Components(1)), Err(ModelError::TooFewSamples { .. })));
    }
}
