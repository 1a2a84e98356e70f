//! The evaluation contract: apply a configuration, run a workload, return
//! metric frames and external performance.

mod driver;
mod synthetic;

pub use driver::{DriverEnv, DriverRequest, DriverResponse};
pub use synthetic::{
    CouplingRule, HardwareCoupling, InfluentialKnob, Interaction, Resource, SyntheticEnv, SyntheticModel,
    SyntheticModelSpec,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::knobspace::{Configuration, KnobCatalog};
use crate::metrics::{MetricFrame, PerfResult};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic model: {0}")]
    InvalidModel(String),
    #[error("driver timed out after {0:.1}s")]
    Timeout(f64),
    #[error("driver protocol violation: {0}")]
    Protocol(String),
    #[error("driver reported: {0}")]
    Driver(String),
    #[error("driver i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub read_fraction: f64,
    pub threads: u32,
    pub duration_s: f64,
    pub frame_interval_s: f64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidWorkload(format!("{}: {m}", self.name)));
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return bad("read_fraction must lie in [0, 1]");
        }
        if self.threads < 1 {
            return bad("threads must be >= 1");
        }
        if !(self.frame_interval_s > 0.0) || !(self.duration_s >= 2.0 * self.frame_interval_s) {
            return bad("duration_s must be at least two frame intervals");
        }
        Ok(())
    }

    /// Number of frames collected: one per completed interval.
    pub fn frame_count(&self) -> usize {
        (self.duration_s / self.frame_interval_s + 1e-9).floor() as usize
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let w: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        w.validate()?;
        Ok(w)
    }

    /// Sysbench read-only: 64 threads, 60 s, a frame every 5 s.
    pub fn sysbench_read_only() -> Self {
        Self { name: "sysbench_ro".into(), read_fraction: 1.0, threads: 64, duration_s: 60.0, frame_interval_s: 5.0 }
    }

    pub fn sysbench_read_write() -> Self {
        Self { name: "sysbench_rw".into(), read_fraction: 0.5, threads: 32, ..Self::sysbench_read_only() }
    }

    pub fn sysbench_write_only() -> Self {
        Self { name: "sysbench_wo".into(), read_fraction: 0.0, threads: 32, ..Self::sysbench_read_only() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvObservation {
    pub frames: Vec<MetricFrame>,
    pub perf: PerfResult,
    pub wall_time_s: f64,
}

/// Something that can run one trial at a time.
pub trait Environment {
    fn catalog(&self) -> &KnobCatalog;

    /// Applies `config`, runs `workload` and reports what happened. `seed`
    /// identifies the trial; deterministic environments must be pure in it.
    fn evaluate(
        &mut self,
        config: &Configuration,
        workload: &WorkloadSpec,
        seed: u64,
    ) -> Result<EnvObservation, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn catalog(&self) -> &KnobCatalog {
        (**self).catalog()
    }

    fn evaluate(
        &mut self,
        config: &Configuration,
        workload: &WorkloadSpec,
        seed: u64,
    ) -> Result<EnvObservation, EnvError> {
        (**self).evaluate(config, workload, seed)
    }
}
