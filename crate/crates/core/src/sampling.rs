//! Latin hypercube designs over the unit cube.

use rand::Rng as _;

use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    /// Uniform position inside each stratum (classical LHS).
    #[default]
    Random,
    /// Stratum midpoints; only the permutations are random.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LhsPlan {
    pub dimension: usize,
    pub count: usize,
    pub seed: u64,
    pub placement: Placement,
}

impl LhsPlan {
    pub fn new(dimension: usize, count: usize, seed: u64) -> Self {
        assert!(dimension >= 1 && count >= 1, "LHS plan needs d >= 1 and n >= 1");
        Self { dimension, count, seed, placement: Placement::Random }
    }

    pub fn centered(self) -> Self {
        Self { placement: Placement::Centered, ..self }
    }
}

/// Index of the stratum `[k/n, (k+1)/n)` containing `v`.
pub fn stratum(v: f64, n: usize) -> usize {
    ((v * n as f64).floor() as usize).min(n - 1)
}

/// Generates `plan.count` points; point `i` is `design[i]`.
///
/// Each dimension draws its own stratum permutation (Fisher-Yates over a
/// ChaCha8 stream), so every dimension covers all `n` strata exactly once.
pub fn lhs_sample(plan: &LhsPlan) -> Vec<Vec<f64>> {
    let n = plan.count;
    let mut rng = seeds::rng(plan.seed);
    let mut design = vec![vec![0.0; plan.dimension]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..plan.dimension {
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        for i in (1..n).rev() {
            let k = rng.random_range(0..=i as u64) as usize;
            perm.swap(i, k);
        }
        for (i, row) in design.iter_mut().enumerate() {
            let offset = match plan.placement {
                Placement::Random => rng.random::<f64>(),
                Placement::Centered => 0.5,
            };
            let k = perm[i];
            let mut v = (k as f64 + offset) / n as f64;
            // (k + u)/n can round up onto the next stratum boundary
            while stratum(v, n) > k {
                v = f64::from_bits(v.to_bits() - 1);
            }
            row[j] = v;
        }
    }
    design
}
