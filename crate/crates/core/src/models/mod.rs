//! Random-forest regression and PCA, shared by the tuning stages.

mod forest;
mod pca;

pub use forest::{forest_fit, select_topk, FeatureRule, ForestModel, ForestSpec, Node, Tree};
pub use pca::{components_for_variance, pca_fit, PcaModel, PcaTarget};

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Writes a model snapshot as pretty JSON.
pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, ModelError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshots_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 3.0, (i * i % 7) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - r[1]).collect();
        let f = forest_fit(&ForestSpec { n_trees: 3, ..Default::default() }, &x, &y).unwrap();
        save_json(&f, dir.path().join("rf.json")).unwrap();
        assert_eq!(load_json::<ForestModel>(dir.path().join("rf.json")).unwrap(), f);
        let p = pca_fit(&x, PcaTarget::Components(2)).unwrap();
        save_json(&p, dir.path().join("pca.json")).unwrap();
        assert_eq!(load_json::<PcaModel>(dir.path().join("pca.json")).unwrap(), p);
    }
}
