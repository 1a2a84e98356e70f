//! The shared pool of (state, action, performance) samples.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::knobspace::{HardwareProfile, KnobCatalog, KnobError, KnobKind, KnobValue};
use crate::metrics::{fitness, MetricsError, PerfResult, StateVector};

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("action has {got} coordinates, pool expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("catalog fingerprint {got} does not match pool ({expected})")]
    Fingerprint { expected: String, got: String },
    #[error("trial index {got} must exceed the last recorded index {last}")]
    TrialOrder { last: u64, got: u64 },
    #[error("no sample matches the selection")]
    Empty,
    #[error("catalogs are not name-compatible: {0}")]
    Incompatible(String),
    #[error("pool file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Knob(#[from] KnobError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Lhs,
    Hint,
    Coarse,
    Td3,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Lhs => "lhs",
            Stage::Hint => "hint",
            Stage::Coarse => "coarse",
            Stage::Td3 => "td3",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: StateVector,
    pub action: Vec<f64>,
    pub perf: PerfResult,
    pub fitness: f64,
    pub stage: Stage,
    pub trial: u64,
    /// Duration of the trial as reported by the environment.
    #[serde(default)]
    pub wall_s: f64,
    /// Measured on other hardware; usable for model fitting only.
    #[serde(default)]
    pub stale: bool,
}

impl Sample {
    pub fn new(
        state: StateVector,
        action: Vec<f64>,
        perf: PerfResult,
        stage: Stage,
        trial: u64,
    ) -> Result<Self, PoolError> {
        let fitness = fitness(&perf)?;
        Ok(Self { state, action, perf, fitness, stage, trial, wall_s: 0.0, stale: false })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    catalog_fp: String,
    hardware: HardwareProfile,
    dimension: usize,
}

/// Append-only sample store, optionally mirrored to a `pool.jsonl` file.
#[derive(Debug)]
pub struct SamplePool {
    catalog_fp: String,
    dimension: usize,
    hardware: HardwareProfile,
    samples: Vec<Sample>,
    sink: Option<BufWriter<File>>,
}

impl Clone for SamplePool {
    /// Clones the in-memory contents; the copy is detached from any file.
    fn clone(&self) -> Self {
        Self {
            catalog_fp: self.catalog_fp.clone(),
            dimension: self.dimension,
            hardware: self.hardware.clone(),
            samples: self.samples.clone(),
            sink: None,
        }
    }
}

impl PartialEq for SamplePool {
    fn eq(&self, other: &Self) -> bool {
        self.catalog_fp == other.catalog_fp
            && self.dimension == other.dimension
            && self.hardware == other.hardware
            && self.samples == other.samples
    }
}

impl SamplePool {
    pub fn new(catalog: &KnobCatalog, hardware: HardwareProfile) -> Self {
        Self {
            catalog_fp: catalog.fingerprint(),
            dimension: catalog.dimension(),
            hardware,
            samples: Vec::new(),
            sink: None,
        }
    }

    pub fn catalog_fingerprint(&self) -> &str {
        &self.catalog_fp
    }

    pub fn hardware(&self) -> &HardwareProfile {
        &self.hardware
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_trial(&self) -> Option<u64> {
        self.samples.last().map(|s| s.trial)
    }

    pub fn find_trial(&self, trial: u64) -> Option<&Sample> {
        self.samples.binary_search_by_key(&trial, |s| s.trial).ok().map(|i| &self.samples[i])
    }

    /// Fails if `catalog` is not the one this pool was recorded against.
    pub fn check_catalog(&self, catalog: &KnobCatalog) -> Result<(), PoolError> {
        let got = catalog.fingerprint();
        if got != self.catalog_fp {
            return Err(PoolError::Fingerprint { expected: self.catalog_fp.clone(), got });
        }
        Ok(())
    }

    pub fn append(&mut self, sample: Sample) -> Result<(), PoolError> {
        if sample.action.len() != self.dimension {
            return Err(PoolError::Dimension { expected: self.dimension, got: sample.action.len() });
        }
        if let Some(last) = self.last_trial() {
            if sample.trial <= last {
                return Err(PoolError::TrialOrder { last, got: sample.trial });
            }
        }
        if let Some(sink) = self.sink.as_mut() {
            serde_json::to_writer(&mut *sink, &sample)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Highest-fitness sample among those accepted by `keep`; ties go to
    /// the earliest trial.
    pub fn best_where(&self, keep: impl Fn(&Sample) -> bool) -> Result<&Sample, PoolError> {
        let mut best: Option<&Sample> = None;
        for s in self.samples.iter().filter(|s| keep(s)) {
            // samples are in trial order, so strict > keeps the earliest
            if best.map_or(true, |b| s.fitness > b.fitness) {
                best = Some(s);
            }
        }
        best.ok_or(PoolError::Empty)
    }

    pub fn best_by_fitness(&self, stage: Option<Stage>) -> Result<&Sample, PoolError> {
        self.best_where(|s| stage.map_or(true, |st| s.stage == st))
    }

    fn header(&self) -> Header {
        Header { catalog_fp: self.catalog_fp.clone(), hardware: self.hardware.clone(), dimension: self.dimension }
    }

    /// Writes the whole pool to `path` and keeps appending there.
    pub fn save(&mut self, path: impl AsRef<Path>) -> Result<(), PoolError> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.sink = Some(w);
        Ok(())
    }

    /// Reads a pool file. A torn final line (from a crash mid-write) is
    /// discarded; corruption anywhere else is an error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let corrupt = |reason: String| PoolError::Corrupt { path: path.to_path_buf(), reason };
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let Some(first) = lines.first() else {
            return Err(corrupt("empty file".into()));
        };
        let header: Header = serde_json::from_str(first).map_err(|e| corrupt(format!("header: {e}")))?;
        let mut pool = Self {
            catalog_fp: header.catalog_fp,
            dimension: header.dimension,
            hardware: header.hardware,
            samples: Vec::new(),
            sink: None,
        };
        for (n, line) in lines.iter().enumerate().skip(1) {
            let last = n + 1 == lines.len();
            match serde_json::from_str::<Sample>(line) {
                Ok(s) => {
                    if last && !complete {
                        log::warn!("{}: dropping unterminated final line", path.display());
                        break;
                    }
                    pool.append(s).map_err(|e| corrupt(format!("line {}: {e}", n + 1)))?;
                }
                Err(_) if last => {
                    log::warn!("{}: dropping torn final line", path.display());
                }
                Err(e) => return Err(corrupt(format!("line {}: {e}", n + 1))),
            }
        }
        Ok(pool)
    }

    /// Loads `path` and reattaches it for appending, rewriting it first if
    /// a torn line had to be dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        let path = path.as_ref();
        let mut pool = Self::load(path)?;
        let expected_lines = 1 + pool.samples.len();
        let text = fs::read_to_string(path)?;
        if text.lines().count() != expected_lines || !text.ends_with('\n') {
            pool.save(path)?;
        } else {
            pool.sink = Some(BufWriter::new(OpenOptions::new().append(true).open(path)?));
        }
        Ok(pool)
    }
}

/// Moves a pool recorded under `old_catalog` onto `new_catalog` and
/// `new_hardware`.
///
/// Each sample's physical values are kept where the new bounds allow and
/// clamped otherwise, then re-normalized. Every migrated sample is marked
/// stale.
pub fn migrate_pool(
    pool: &SamplePool,
    old_catalog: &KnobCatalog,
    new_hardware: HardwareProfile,
    new_catalog: &KnobCatalog,
) -> Result<SamplePool, PoolError> {
    pool.check_catalog(old_catalog)?;
    let old_names: BTreeSet<&str> = old_catalog.knobs().iter().map(|k| k.name.as_str()).collect();
    let new_names: BTreeSet<&str> = new_catalog.knobs().iter().map(|k| k.name.as_str()).collect();
    if old_names != new_names {
        let missing: Vec<_> = old_names.difference(&new_names).copied().collect();
        let extra: Vec<_> = new_names.difference(&old_names).copied().collect();
        return Err(PoolError::Incompatible(format!("missing {missing:?}, unexpected {extra:?}")));
    }
    for k in new_catalog.knobs() {
        let old = old_catalog.get(&k.name).expect("names checked");
        if old.kind != k.kind || (k.kind == KnobKind::Enum && old.enum_values != k.enum_values) {
            return Err(PoolError::Incompatible(format!("knob `{}` changed kind or literals", k.name)));
        }
    }
    let mut out = SamplePool::new(new_catalog, new_hardware);
    for s in &pool.samples {
        let old_cfg = old_catalog.denormalize(&s.action)?;
        let physical: BTreeMap<String, KnobValue> = new_catalog
            .knobs()
            .iter()
            .map(|k| {
                let v = old_cfg.physical[&k.name].clone();
                let v = match v {
                    KnobValue::Number(x) => KnobValue::Number(k.clamp_quantize(x)),
                    other => other,
                };
                (k.name.clone(), v)
            })
            .collect();
        let action = new_catalog.normalize(&physical)?;
        out.append(Sample { action, stale: true, ..s.clone() })?;
    }
    Ok(out)
}
