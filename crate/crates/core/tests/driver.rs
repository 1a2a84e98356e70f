mod common;

use std::time::Duration;

use knobtune::pipeline::{run_pipeline, Budgets, EnvSource, Execution, RunInputs};
use knobtune::{shipped, Backend, DriverEnv, EnvError, Environment, KnobValue, WorkloadSpec};

use common::{plan, repo};

fn driver(mode: &str, nth: u32, timeout: Duration) -> DriverEnv {
    DriverEnv::new(command(mode, nth), shipped::synthetic50(), timeout)
}

fn command(mode: &str, nth: u32) -> String {
    format!(
        "python3 {} {} {mode} {nth}",
        repo("crates/core/tests/fixtures/fake_driver.py"),
        repo("schemas/innodb63.json")
    )
}

fn evaluate(env: &mut DriverEnv, seed: u64) -> Result<knobtune::EnvObservation, EnvError> {
    let cfg = shipped::synthetic50().default_configuration();
    env.evaluate(&cfg, &WorkloadSpec::sysbench_read_write(), seed)
}

#[test]
fn healthy_driver_returns_frames_and_perf() {
    let mut env = driver("ok", 0, Duration::from_secs(20));
    for seed in [1u64, 2, 3] {
        let obs = evaluate(&mut env, seed).unwrap();
        assert_eq!(obs.frames.len(), 4);
        assert!(obs.frames.iter().all(|f| f.values.len() == 63));
        // the default buffer pool is 8 GiB
        assert_eq!(obs.perf.tps, 1008.0);
        assert!(obs.wall_time_s > 0.0);
    }
}

#[test]
fn error_reply_fails_only_that_trial() {
    let mut env = driver("error", 2, Duration::from_secs(20));
    assert!(evaluate(&mut env, 1).is_ok());
    assert!(matches!(evaluate(&mut env, 2), Err(EnvError::Driver(m)) if m.contains("aborted")));
    assert!(evaluate(&mut env, 3).is_ok());
}

#[test]
fn hung_driver_times_out_and_restarts() {
    let mut env = driver("hang", 2, Duration::from_millis(1500));
    assert!(evaluate(&mut env, 1).is_ok());
    assert!(matches!(evaluate(&mut env, 2), Err(EnvError::Timeout(_))));
    assert!(evaluate(&mut env, 3).is_ok());
}

#[test]
fn crashed_driver_restarts() {
    let mut env = driver("crash", 2, Duration::from_secs(20));
    assert!(evaluate(&mut env, 1).is_ok());
    assert!(evaluate(&mut env, 2).is_err());
    assert!(evaluate(&mut env, 3).is_ok());
}

#[test]
fn garbage_reply_is_a_protocol_error() {
    let mut env = driver("garbage", 1, Duration::from_secs(20));
    assert!(matches!(evaluate(&mut env, 1), Err(EnvError::Protocol(_)) | Err(EnvError::Json(_))));
    assert!(evaluate(&mut env, 2).is_ok());
}

#[test]
fn failed_trials_consume_budget_and_leave_gaps() {
    let mut p = plan(Backend::Db, 5, shipped::hardware_12c_64g());
    p.env = EnvSource::Driver(command("error", 4));
    p.budgets = Budgets { lhs: 10, stage2: 3, td3: 0 };
    let mut inputs = RunInputs::load(&p).unwrap();
    let report = run_pipeline(&p, &mut inputs, &Execution::default()).unwrap();
    let r = report.report().unwrap();
    // a reported error keeps the process, so only its fourth request fails
    assert_eq!(r.failed_trials, vec![3]);
    assert_eq!(r.series.len(), 12);
    assert_eq!(r.series.last().unwrap().trial, 12);
    let physical = &r.best.as_ref().unwrap().physical;
    assert!(matches!(physical["innodb_buffer_pool_size"], KnobValue::Number(_)));
}
