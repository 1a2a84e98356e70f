//! Random-forest regression with impurity-based feature importance.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRule {
    All,
    Sqrt,
    Third,
}

impl FeatureRule {
    fn count(self, d: usize) -> usize {
        let m = match self {
            FeatureRule::All => d,
            FeatureRule::Sqrt => (d as f64).sqrt().round() as usize,
            FeatureRule::Third => d / 3,
        };
        m.clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureRule,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeatureRule::All,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A regression tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub spec: ForestSpec,
    pub dimension: usize,
    pub trees: Vec<Tree>,
    /// Total squared-error reduction per feature, normalized to sum 1.
    pub importances: Vec<f64>,
    /// Set when no tree found a single split (e.g. constant target).
    pub degenerate: bool,
    pub training_fingerprint: String,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    spec: &'a ForestSpec,
    rng: seeds::Rng,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    left_count: usize,
}

fn sse(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
    let sse = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum::<f64>();
    (mean, sse)
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        let m = self.spec.features_per_split.count(d);
        let mut all: Vec<usize> = (0..d).collect();
        if m < d {
            for i in 0..m {
                let j = self.rng.random_range(i..d);
                all.swap(i, j);
            }
            all.truncate(m);
            all.sort_unstable();
        }
        all
    }

    fn best_split(&mut self, rows: &mut [usize], parent_sse: f64) -> Option<BestSplit> {
        let leaf = self.spec.min_samples_leaf.max(1);
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            let total_sq: f64 = rows.iter().map(|&r| self.y[r] * self.y[r]).sum();
            for i in 0..n - 1 {
                let yi = self.y[rows[i]];
                left_sum += yi;
                left_sq += yi * yi;
                let (lo, hi) = (self.x[rows[i]][f], self.x[rows[i + 1]][f]);
                let nl = i + 1;
                if lo == hi || nl < leaf || n - nl < leaf {
                    continue;
                }
                let nr = (n - nl) as f64;
                let right_sum = total - left_sum;
                let left_sse = left_sq - left_sum * left_sum / nl as f64;
                let right_sse = (total_sq - left_sq) - right_sum * right_sum / nr;
                let gain = parent_sse - left_sse.max(0.0) - right_sse.max(0.0);
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit { gain, feature: f, threshold: lo + (hi - lo) / 2.0, left_count: nl });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * parent_sse.max(f64::MIN_POSITIVE) && b.gain > 0.0)
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let (mean, parent_sse) = sse(self.y, rows);
        self.nodes.push(Node::Leaf { value: mean });
        let leaf = self.spec.min_samples_leaf.max(1);
        if rows.len() < 2 * leaf || parent_sse <= 0.0 || self.spec.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some(split) = self.best_split(rows, parent_sse) else {
            return id;
        };
        // exact partition by the chosen threshold, stable in row order
        let f = split.feature;
        rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        debug_assert!(rows[..split.left_count].iter().all(|&r| self.x[r][f] <= split.threshold));
        // recompute the gain from the actual partition so importances are exact sums
        let (l, r) = rows.split_at_mut(split.left_count);
        let gain = parent_sse - sse(self.y, l).1 - sse(self.y, r).1;
        self.gains[f] += gain.max(0.0);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold: split.threshold, left, right };
        id
    }
}

fn fingerprint(x: &[Vec<f64>], y: &[f64]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for row in x {
        for v in row {
            h.update(v.to_le_bytes());
        }
    }
    for v in y {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Fits a forest on rows `x` and targets `y`. Deterministic in `spec.seed`.
pub fn forest_fit(spec: &ForestSpec, x: &[Vec<f64>], y: &[f64]) -> Result<ForestModel, ModelError> {
    if spec.n_trees == 0 {
        return Err(ModelError::Invalid("n_trees must be >= 1".into()));
    }
    if x.len() < 2 {
        return Err(ModelError::TooFewSamples { need: 2, got: x.len() });
    }
    if x.len() != y.len() {
        return Err(ModelError::Dimension { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(ModelError::Invalid("rows have no features".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(ModelError::Dimension { expected: d, got: row.len() });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let n = x.len();
    let grown: Vec<(Tree, Vec<f64>)> = (0..spec.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::derived_rng(spec.seed, "forest-tree", t as u64);
            let mut rows: Vec<usize> =
                if spec.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let mut b = Builder { x, y, spec, rng, nodes: Vec::new(), gains: vec![0.0; d] };
            b.grow(&mut rows, 0);
            (Tree { nodes: b.nodes }, b.gains)
        })
        .collect();
    let mut importances = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, gains) in grown {
        for (acc, g) in importances.iter_mut().zip(gains) {
            *acc += g;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    let degenerate = !(total > 0.0);
    if degenerate {
        importances.iter_mut().for_each(|v| *v = 0.0);
    } else {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        spec: spec.clone(),
        dimension: d,
        trees,
        importances,
        degenerate,
        training_fingerprint: fingerprint(x, y),
    })
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(self.predict_with_spread(x)?.0)
    }

    /// Mean over trees and the population standard deviation across trees.
    pub fn predict_with_spread(&self, x: &[f64]) -> Result<(f64, f64), ModelError> {
        if x.len() != self.dimension {
            return Err(ModelError::Dimension { expected: self.dimension, got: x.len() });
        }
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        Ok((mean, var.sqrt()))
    }
}

/// Indices of the `k` largest importances, largest first; ties go to the
/// lower index.
pub fn select_topk(importances: &[f64], k: usize) -> Result<Vec<usize>, ModelError> {
    if k == 0 || k > importances.len() {
        return Err(ModelError::Invalid(format!("k = {k} outside 1..={}", importances.len())));
    }
    let mut idx: Vec<usize> = (0..importances.len()).collect();
    idx.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}
