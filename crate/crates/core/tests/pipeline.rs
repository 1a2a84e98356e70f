mod common;

use std::fs;

use proptest::prelude::*;

use knobtune::pipeline::{
    emit_report, load_old_run, reemit_report, run_pipeline, run_stage1, semi_transfer, Budgets, Execution,
    PipelineError, RunDir, RunInputs, RunPlan, RunStatus,
};
use knobtune::sampling::{lhs_sample, LhsPlan};
use knobtune::trial::TrialContext;
use knobtune::{seeds, shipped, Backend, SamplePool, Stage};

use common::plan;

fn budgets(lhs: usize, stage2: usize, td3: usize) -> Budgets {
    Budgets { lhs, stage2, td3 }
}

fn small(backend: Backend, seed: u64, b: Budgets) -> RunPlan {
    let mut p = plan(backend, seed, shipped::hardware_12c_64g());
    p.budgets = b;
    p
}

fn run(p: &RunPlan, exec: &Execution) -> Result<RunStatus, PipelineError> {
    let mut inputs = RunInputs::load(p)?;
    run_pipeline(p, &mut inputs, exec)
}

fn completed(p: &RunPlan) -> knobtune::RunReport {
    match run(p, &Execution::default()).unwrap() {
        RunStatus::Completed(r) => *r,
        s => panic!("unexpected {s:?}"),
    }
}

fn count(r: &knobtune::RunReport, stage: Stage) -> usize {
    r.series.iter().filter(|s| s.stage == stage).count()
}

#[test]
fn stage_budgets_bound_trial_counts() {
    let r = completed(&small(Backend::Db, 1, budgets(20, 5, 0)));
    assert_eq!(count(&r, Stage::Lhs), 20);
    assert!(count(&r, Stage::Hint) <= 5);
    let r = completed(&small(Backend::Gp, 1, budgets(20, 50, 0)));
    assert!(count(&r, Stage::Coarse) <= 50);
    assert_eq!(r.stages[1].stage, "coarse");
}

#[test]
fn empty_stage_two_passes_baseline_through() {
    let r = completed(&small(Backend::Db, 2, budgets(15, 0, 5)));
    assert_eq!(count(&r, Stage::Hint), 0);
    assert_eq!(r.stages[1].trials, 0);
    assert_eq!(r.stages[1].stage_best, None);
    assert_eq!(r.stages[1].best_so_far, r.stages[0].best_so_far);
    assert_eq!(count(&r, Stage::Td3), 5);
}

#[test]
fn full_trust_ratio_leaves_the_design_untouched() {
    let mut p = small(Backend::Db, 3, budgets(12, 0, 0));
    p.trust_ratio = 1.0;
    let mut inputs = RunInputs::load(&p).unwrap();
    let mut pool = SamplePool::new(&inputs.catalog, p.hardware.clone());
    let mut ctx = TrialContext::new(inputs.env.as_mut(), &inputs.schema, &p.workload, &mut pool, p.seed);
    run_stage1(&mut ctx, &p).unwrap();
    let design = lhs_sample(&LhsPlan::new(50, 12, seeds::derive(3, "lhs", 0)));
    let actions: Vec<Vec<f64>> = pool.samples().iter().map(|s| s.action.clone()).collect();
    assert_eq!(actions, design);
}

#[test]
fn trust_clip_keeps_stage_one_near_defaults() {
    let p = small(Backend::Db, 4, budgets(30, 0, 0));
    let tmp = tempfile::tempdir().unwrap();
    run(&p, &Execution { out: Some(tmp.path().into()), ..Execution::default() }).unwrap();
    let pool = SamplePool::load(RunDir::new(tmp.path()).pool()).unwrap();
    let center = shipped::synthetic50().default_configuration().normalized;
    for s in pool.samples() {
        for (a, c) in s.action.iter().zip(&center) {
            assert!((a - c).abs() <= 0.05 + 1e-12);
        }
    }
}

#[test]
fn default_budget_run_writes_155_rows() {
    let p = plan(Backend::Db, 5, shipped::hardware_12c_64g());
    let tmp = tempfile::tempdir().unwrap();
    run(&p, &Execution { out: Some(tmp.path().into()), ..Execution::default() }).unwrap();
    let dir = RunDir::new(tmp.path());
    let csv = fs::read_to_string(dir.series()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "trial,stage,fitness,tps,p95_ms,qps,wall_s");
    assert_eq!(csv.lines().count(), 156);
    for path in [dir.plan(), dir.pool(), dir.forest(), dir.pca(), dir.selection(), dir.agent(), dir.report()] {
        assert!(path.exists(), "{} missing", path.display());
    }

    let report = fs::read(dir.report()).unwrap();
    reemit_report(tmp.path()).unwrap();
    assert_eq!(fs::read(dir.report()).unwrap(), report);
    assert_eq!(fs::read_to_string(dir.series()).unwrap(), csv);
}

#[test]
fn resume_without_budget_left_runs_nothing() {
    let p = small(Backend::Db, 6, budgets(10, 0, 0));
    let tmp = tempfile::tempdir().unwrap();
    let exec = Execution { out: Some(tmp.path().into()), ..Execution::default() };
    run(&p, &exec).unwrap();
    let before = fs::read(RunDir::new(tmp.path()).pool()).unwrap();
    run(&p, &Execution { resume: true, ..exec.clone() }).unwrap();
    assert_eq!(fs::read(RunDir::new(tmp.path()).pool()).unwrap(), before);
    assert!(matches!(run(&p, &exec), Err(PipelineError::Plan(_))));
}

#[test]
fn resume_after_every_stage_boundary_matches_uninterrupted_run() {
    let p = small(Backend::Gp, 7, budgets(10, 8, 6));
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    run(&p, &Execution { out: Some(full.clone()), ..Execution::default() }).unwrap();
    for stop in [0u64, 9, 10, 17, 20] {
        let dir = tmp.path().join(format!("stop{stop}"));
        let exec = Execution { out: Some(dir.clone()), stop_after: Some(stop), ..Execution::default() };
        assert_eq!(run(&p, &exec).unwrap(), RunStatus::Stopped(stop));
        run(&p, &Execution { out: Some(dir.clone()), resume: true, ..Execution::default() }).unwrap();
        assert_eq!(fs::read(dir.join("report.json")).unwrap(), fs::read(full.join("report.json")).unwrap());
    }
}

#[test]
fn tampered_pool_is_detected_on_resume() {
    let p = small(Backend::Db, 8, budgets(6, 0, 0));
    let tmp = tempfile::tempdir().unwrap();
    let exec = Execution { out: Some(tmp.path().into()), stop_after: Some(3), ..Execution::default() };
    run(&p, &exec).unwrap();
    let path = RunDir::new(tmp.path()).pool();
    let mut pool = SamplePool::load(&path).unwrap();
    let mut samples = pool.samples().to_vec();
    samples[2].action[0] = 1.0 - samples[2].action[0];
    pool = {
        let mut fresh = SamplePool::new(&shipped::synthetic50(), pool.hardware().clone());
        for s in samples {
            fresh.append(s).unwrap();
        }
        fresh
    };
    pool.save(&path).unwrap();
    let err = run(&p, &Execution { out: Some(tmp.path().into()), resume: true, ..Execution::default() });
    assert!(matches!(err, Err(PipelineError::Diverged(2))));
}

#[test]
fn plan_errors() {
    assert!(matches!(
        run(&small(Backend::Db, 0, budgets(0, 0, 0)), &Execution::default()),
        Err(PipelineError::Plan(_))
    ));
    let mut p = small(Backend::Db, 0, budgets(5, 3, 0));
    p.hints = None;
    assert!(matches!(run(&p, &Execution::default()), Err(PipelineError::Missing(_))));
    // stage 2 without any evaluated baseline
    assert!(matches!(
        run(&small(Backend::Db, 0, budgets(0, 3, 0)), &Execution::default()),
        Err(PipelineError::Missing(_))
    ));
    // TD3 needs stage-1 samples to fit its models
    assert!(matches!(
        run(&small(Backend::Db, 0, budgets(1, 0, 3)), &Execution::default()),
        Err(PipelineError::Model(_))
    ));
    let mut p = small(Backend::Db, 0, budgets(5, 0, 0));
    p.trust_ratio = 0.0;
    assert!(matches!(run(&p, &Execution::default()), Err(PipelineError::Plan(_))));
}

#[test]
fn disabled_stages_leave_no_artifacts() {
    let mut p = small(Backend::Db, 9, budgets(8, 0, 0));
    p.hints = None;
    let tmp = tempfile::tempdir().unwrap();
    run(&p, &Execution { out: Some(tmp.path().into()), ..Execution::default() }).unwrap();
    let dir = RunDir::new(tmp.path());
    assert!(!dir.forest().exists() && !dir.selection().exists() && !dir.agent().exists());
    let r: knobtune::RunReport = serde_json::from_str(&fs::read_to_string(dir.report()).unwrap()).unwrap();
    assert!(r.selection.is_none() && r.agent_checkpoint.is_none());
}

fn old_run(seed: u64, b: Budgets) -> (tempfile::TempDir, RunPlan) {
    let tmp = tempfile::tempdir().unwrap();
    let p = small(Backend::Db, seed, b);
    run(&p, &Execution { out: Some(tmp.path().join("old")), ..Execution::default() }).unwrap();
    (tmp, p)
}

fn transfer(tmp: &tempfile::TempDir, p: &RunPlan, hw: knobtune::HardwareProfile, b: Budgets) -> knobtune::RunReport {
    let (_, pool, catalog) = load_old_run(tmp.path().join("old")).unwrap();
    let mut p2 = p.clone();
    p2.hardware = hw;
    p2.budgets = b;
    p2.transfer_from = Some("old".into());
    let mut inputs = RunInputs::load(&p2).unwrap();
    match semi_transfer(&pool, &catalog, &p2, &mut inputs, &Execution::default()).unwrap() {
        RunStatus::Completed(r) => *r,
        s => panic!("unexpected {s:?}"),
    }
}

#[test]
fn zero_budget_transfer_only_remeasures_the_baseline() {
    let (tmp, p) = old_run(10, budgets(20, 3, 0));
    let r = transfer(&tmp, &p, shipped::hardware_12c_32g(), budgets(0, 0, 0));
    assert_eq!(r.series.len(), 1);
    assert_eq!(r.series[0].stage, Stage::Hint);
    assert_eq!(r.series[0].trial, 23);
    assert!(r.transfer);
}

#[test]
fn transfer_budget_bounds_new_trials() {
    let (tmp, p) = old_run(11, budgets(30, 5, 5));
    let r = transfer(&tmp, &p, shipped::hardware_12c_16g(), budgets(0, 15, 15));
    assert!(r.series.len() <= 30);
    assert_eq!(count(&r, Stage::Hint), 15);
    assert_eq!(count(&r, Stage::Lhs), 0);
    assert_eq!(r.selection.as_ref().unwrap().fitted_on, 30);
}

#[test]
fn self_transfer_keeps_the_old_best() {
    let noise = 0.02;
    for seed in 0..4 {
        let (tmp, p) = old_run(20 + seed, budgets(120, 5, 30));
        let old_best = completed(&p).best.unwrap().fitness;
        let r = transfer(&tmp, &p, shipped::hardware_12c_64g(), budgets(0, 15, 15));
        let new_best = r.best.unwrap().fitness;
        // tps and latency each carry the noise, so fitness drifts by
        // roughly twice the log-normal spread
        assert!(new_best >= old_best * (-2.0 * 2.0 * noise as f64).exp(), "seed {seed}: {new_best} vs {old_best}");
    }
}

#[test]
fn incompatible_catalog_is_rejected() {
    let (tmp, p) = old_run(12, budgets(6, 0, 0));
    let (_, pool, catalog) = load_old_run(tmp.path().join("old")).unwrap();
    let mut p2 = p.clone();
    p2.transfer_from = Some("old".into());
    p2.budgets = budgets(0, 2, 0);
    let catalog2 = shipped::mysql266();
    let hints = knobtune::hints::parse_hints(shipped::MYSQL_DEMO_HINTS, &catalog2).unwrap();
    let env = Box::new(
        knobtune::SyntheticEnv::from_spec(
            knobtune::SyntheticModelSpec::from_json(shipped::SYNTHETIC50_MODEL).unwrap(),
            catalog2.clone(),
            shipped::innodb63(),
        )
        .unwrap(),
    );
    let mut inputs = RunInputs { catalog: catalog2, schema: shipped::innodb63(), env, hints };
    let err = semi_transfer(&pool, &catalog, &p2, &mut inputs, &Execution::default());
    assert!(matches!(err, Err(PipelineError::Pool(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn report_bookkeeping_matches_pool(seed in 0u64..1000, lhs in 2usize..25, s2 in 0usize..6, td3 in 0usize..6, gp in any::<bool>()) {
        let backend = if gp { Backend::Gp } else { Backend::Db };
        let p = small(backend, seed, budgets(lhs, s2, td3));
        let tmp = tempfile::tempdir().unwrap();
        run(&p, &Execution { out: Some(tmp.path().into()), ..Execution::default() }).unwrap();
        let pool = SamplePool::load(RunDir::new(tmp.path()).pool()).unwrap();
        let r = emit_report(&p, &pool, &shipped::synthetic50(), None, None).unwrap();

        prop_assert_eq!(r.series.len(), pool.len());
        prop_assert!(r.series.len() <= lhs + s2 + td3);
        let mut best = f64::NEG_INFINITY;
        for (row, s) in r.series.iter().zip(pool.samples()) {
            prop_assert_eq!(row.trial, s.trial);
            prop_assert_eq!(row.fitness, s.fitness);
            best = best.max(row.fitness);
        }
        let argmax = pool.best_by_fitness(None).unwrap();
        prop_assert_eq!(r.best.as_ref().unwrap().trial, argmax.trial);
        prop_assert_eq!(r.best.as_ref().unwrap().fitness, best);
        let so_far: Vec<f64> = r.stages.iter().filter_map(|s| s.best_so_far).collect();
        prop_assert!(so_far.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*so_far.last().unwrap(), best);
    }
}
