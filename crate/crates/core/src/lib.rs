//! Staged database knob tuning: a Latin-hypercube warm start, a
//! knowledge-guided stage built from hint templates, and TD3 fine-tuning
//! over forest-selected knobs and PCA-compressed metrics.

pub mod coarse;
pub mod environment;
pub mod hints;
pub mod knobspace;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod samplepool;
pub mod sampling;
pub mod seeds;
pub mod shipped;
pub mod td3;
pub mod trial;

pub use environment::{
    DriverEnv, EnvError, EnvObservation, Environment, SyntheticEnv, SyntheticModel, SyntheticModelSpec, WorkloadSpec,
};
pub use hints::{HintEntry, HintError, Template};
pub use knobspace::{
    Configuration, HardwareProfile, KnobCatalog, KnobError, KnobKind, KnobSpec, KnobValue, Scale, TrustRegion,
};
pub use metrics::{fitness, MetricFrame, MetricSchema, MetricsError, PerfResult, StateVector};
pub use models::{ForestModel, ForestSpec, ModelError, PcaModel, PcaTarget};
pub use pipeline::{
    run_pipeline, semi_transfer, Backend, Budgets, EnvSource, Execution, PipelineError, RunInputs, RunPlan, RunReport,
    RunStatus,
};
pub use samplepool::{migrate_pool, PoolError, Sample, SamplePool, Stage};
pub use td3::{Td3Agent, Td3Config, Td3Error};
