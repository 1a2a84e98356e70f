#![allow(dead_code)]

use std::path::PathBuf;

use knobtune::pipeline::{Backend, Budgets, EnvSource, RunPlan};
use knobtune::{shipped, HardwareProfile, PcaTarget, SyntheticModel, SyntheticModelSpec, WorkloadSpec};

pub fn repo(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", rel].iter().collect();
    p.canonicalize().expect("shipped file exists").to_string_lossy().into_owned()
}

pub fn workload() -> WorkloadSpec {
    WorkloadSpec::load(repo("workloads/sysbench_rw.json")).unwrap()
}

pub fn plan(backend: Backend, seed: u64, hardware: HardwareProfile) -> RunPlan {
    RunPlan {
        catalog: repo("catalogs/synthetic50.json"),
        schema: repo("schemas/innodb63.json"),
        env: EnvSource::Synthetic(repo("envs/synthetic50.json")),
        workload: workload(),
        hardware,
        stage2: backend,
        hints: Some(repo("hints/synthetic50.json")),
        budgets: Budgets { lhs: 120, stage2: backend.default_budget(), td3: 30 },
        trust_ratio: 0.05,
        topk: 20,
        pca: PcaTarget::Variance(0.95),
        seed,
        driver_timeout_s: 30.0,
        transfer_from: None,
    }
}

/// The noise-free model behind the shipped synthetic environment.
pub fn model(hardware: HardwareProfile) -> SyntheticModel {
    let spec = SyntheticModelSpec::from_json(shipped::SYNTHETIC50_MODEL).unwrap().with_hardware(hardware);
    SyntheticModel::new(spec, shipped::synthetic50()).unwrap()
}

pub const PLANTED: [usize; 5] = [3, 11, 19, 27, 40];
