//! Orchestration: warm start, knowledge stage, TD3 fine-tuning, the
//! semi-transfer workflow, run directories and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::coarse::{build_feasible_space, coarse_tune, CoarseError, CoarseLog};
use crate::environment::{DriverEnv, EnvError, Environment, SyntheticEnv, SyntheticModelSpec, WorkloadSpec};
use crate::hints::{hint_tune, load_hints, HintEntry, HintError, HintLog};
use crate::knobspace::{HardwareProfile, KnobCatalog, KnobError, KnobValue, TrustRegion};
use crate::metrics::{MetricSchema, MetricsError};
use crate::models::{
    forest_fit, load_json, pca_fit, save_json, select_topk, ForestModel, ForestSpec, ModelError, PcaModel, PcaTarget,
};
use crate::samplepool::{migrate_pool, PoolError, Sample, SamplePool, Stage};
use crate::sampling::{lhs_sample, LhsPlan};
use crate::seeds;
use crate::td3::{td3_tune, Td3Config, Td3Error};
use crate::trial::{Abort, StageOutcome, TrialContext};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("{0}")]
    Missing(String),
    #[error("resumed pool disagrees with the replayed run at trial {0}")]
    Diverged(u64),
    #[error(transparent)]
    Knob(#[from] KnobError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hint(#[from] HintError),
    #[error(transparent)]
    Coarse(#[from] CoarseError),
    #[error(transparent)]
    Td3(#[from] Td3Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Hint templates scaled by a factor/weight controller.
    Db,
    /// Tiny candidate space searched with a forest surrogate.
    Gp,
}

impl Backend {
    pub fn stage(self) -> Stage {
        match self {
            Backend::Db => Stage::Hint,
            Backend::Gp => Stage::Coarse,
        }
    }

    pub fn default_budget(self) -> usize {
        match self {
            Backend::Db => 5,
            Backend::Gp => 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub lhs: usize,
    pub stage2: usize,
    pub td3: usize,
}

/// Where trials are evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "target")]
pub enum EnvSource {
    /// Path of a synthetic model spec.
    Synthetic(String),
    /// Shell command of an external driver.
    Driver(String),
}

impl EnvSource {
    /// Parses `synthetic:<spec.json>` or `driver:<command>`.
    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s.split_once(':') {
            Some(("synthetic", p)) if !p.is_empty() => Ok(EnvSource::Synthetic(p.into())),
            Some(("driver", c)) if !c.is_empty() => Ok(EnvSource::Driver(c.into())),
            _ => {
                Err(PipelineError::Plan(format!("environment `{s}` must be synthetic:<spec.json> or driver:<command>")))
            }
        }
    }
}

impl std::fmt::Display for EnvSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvSource::Synthetic(p) => write!(f, "synthetic:{p}"),
            EnvSource::Driver(c) => write!(f, "driver:{c}"),
        }
    }
}

/// Everything that defines a run; stored as `plan.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub catalog: String,
    pub schema: String,
    pub env: EnvSource,
    pub workload: WorkloadSpec,
    pub hardware: HardwareProfile,
    pub stage2: Backend,
    pub hints: Option<String>,
    pub budgets: Budgets,
    pub trust_ratio: f64,
    pub topk: usize,
    pub pca: PcaTarget,
    pub seed: u64,
    #[serde(default = "default_driver_timeout")]
    pub driver_timeout_s: f64,
    /// Set for semi-transfer runs: the run directory migrated from.
    #[serde(default)]
    pub transfer_from: Option<String>,
}

fn default_driver_timeout() -> f64 {
    600.0
}

impl RunPlan {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Plan(m));
        if !(self.trust_ratio > 0.0 && self.trust_ratio <= 1.0) {
            return bad(format!("trust ratio {} outside (0, 1]", self.trust_ratio));
        }
        if self.topk == 0 {
            return bad("topk must be >= 1".into());
        }
        let b = self.budgets;
        if self.transfer_from.is_none() && b.lhs + b.stage2 + b.td3 == 0 {
            return bad("every stage budget is zero".into());
        }
        match self.pca {
            PcaTarget::Components(0) => return bad("pca k must be >= 1".into()),
            PcaTarget::Variance(f) if !(f > 0.0 && f <= 1.0) => return bad(format!("pca variance {f} outside (0, 1]")),
            _ => {}
        }
        if !(self.driver_timeout_s > 0.0) {
            return bad("driver timeout must be positive".into());
        }
        self.hardware.validate().map_err(PipelineError::Plan)?;
        self.workload.validate()?;
        Ok(())
    }
}

/// Loaded counterparts of a plan's file references.
pub struct RunInputs {
    pub catalog: KnobCatalog,
    pub schema: MetricSchema,
    pub env: Box<dyn Environment>,
    pub hints: Vec<HintEntry>,
}

impl RunInputs {
    /// Loads every file the plan names. A synthetic model runs on the
    /// plan's hardware, not the hardware written in its spec.
    pub fn load(plan: &RunPlan) -> Result<Self, PipelineError> {
        let catalog = KnobCatalog::load(&plan.catalog)?;
        let schema = MetricSchema::load(&plan.schema)?;
        let env: Box<dyn Environment> = match &plan.env {
            EnvSource::Synthetic(path) => {
                let spec = SyntheticModelSpec::load(path)?.with_hardware(plan.hardware.clone());
                Box::new(SyntheticEnv::from_spec(spec, catalog.clone(), schema.clone())?)
            }
            EnvSource::Driver(cmd) => {
                Box::new(DriverEnv::new(cmd.clone(), catalog.clone(), Duration::from_secs_f64(plan.driver_timeout_s)))
            }
        };
        let hints = match &plan.hints {
            Some(p) => load_hints(p, &catalog)?,
            None => Vec::new(),
        };
        Ok(Self { catalog, schema, env, hints })
    }
}

/// File layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn plan(&self) -> PathBuf {
        self.root.join("plan.json")
    }
    pub fn pool(&self) -> PathBuf {
        self.root.join("pool.jsonl")
    }
    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn forest(&self) -> PathBuf {
        self.models().join("forest.json")
    }
    pub fn pca(&self) -> PathBuf {
        self.models().join("pca.json")
    }
    pub fn selection(&self) -> PathBuf {
        self.models().join("selection.json")
    }
    pub fn agent_dir(&self) -> PathBuf {
        self.root.join("agent")
    }
    pub fn agent(&self) -> PathBuf {
        self.agent_dir().join("agent.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn series(&self) -> PathBuf {
        self.root.join("series.csv")
    }

    fn create(&self) -> Result<(), PipelineError> {
        fs::create_dir_all(self.models())?;
        fs::create_dir_all(self.agent_dir())?;
        Ok(())
    }
}

/// Knob selection and state compression handed to TD3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub topk: Vec<usize>,
    pub names: Vec<String>,
    pub importances: Vec<f64>,
    pub forest_degenerate: bool,
    pub pca_k: usize,
    pub pca_ratios: Vec<f64>,
    /// Samples the models were fitted on.
    pub fitted_on: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub trial: u64,
    pub stage: Stage,
    pub fitness: f64,
    pub tps: f64,
    pub p95_ms: f64,
    pub qps: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub budget: usize,
    pub trials: usize,
    /// Best fitness among this stage's own trials.
    pub stage_best: Option<f64>,
    /// Best fitness over the run up to the end of this stage.
    pub best_so_far: Option<f64>,
    /// 1-based position in the series of the sample holding `best_so_far`.
    pub steps_to_best: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub trial: u64,
    pub stage: Stage,
    pub fitness: f64,
    pub tps: f64,
    pub p95_ms: f64,
    pub qps: f64,
    pub action: Vec<f64>,
    pub physical: BTreeMap<String, KnobValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub backend: Backend,
    pub transfer: bool,
    pub total_budget: usize,
    pub series: Vec<SeriesRow>,
    /// Trial indices that were attempted but produced no sample.
    pub failed_trials: Vec<u64>,
    pub stages: Vec<StageSummary>,
    pub best: Option<BestConfig>,
    pub selection: Option<Selection>,
    pub agent_checkpoint: Option<String>,
}

/// Result of driving a run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed(Box<RunReport>),
    /// Halted on request after this trial index.
    Stopped(u64),
}

impl RunStatus {
    pub fn report(&self) -> Option<&RunReport> {
        match self {
            RunStatus::Completed(r) => Some(r),
            RunStatus::Stopped(_) => None,
        }
    }
}

/// Options that steer execution without changing the run.
#[derive(Debug, Clone, Default)]
pub struct Execution {
    pub out: Option<PathBuf>,
    pub resume: bool,
    pub stop_after: Option<u64>,
    /// Overrides for TD3 hyper-parameters; the seed is always derived.
    pub td3: Option<Td3Config>,
}

fn abort(e: Abort) -> Result<Option<u64>, PipelineError> {
    match e {
        Abort::Stopped(n) => Ok(Some(n)),
        Abort::Diverged(n) => Err(PipelineError::Diverged(n)),
        Abort::Pool(p) => Err(p.into()),
    }
}

macro_rules! stage_try {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(a) => match abort(a)? {
                Some(n) => return Ok(Flow::Stopped(n)),
                None => unreachable!(),
            },
        }
    };
}

enum Flow<T> {
    Done(T),
    Stopped(u64),
}

/// Stage 1: LHS over the unit cube, clipped into the trust region around
/// the catalog defaults.
pub fn run_stage1(ctx: &mut TrialContext<'_>, plan: &RunPlan) -> Result<StageOutcome, Abort> {
    let catalog = ctx.catalog().clone();
    let center = catalog.default_configuration().normalized;
    let mut outcome = StageOutcome::passthrough(center.clone(), f64::NEG_INFINITY);
    if plan.budgets.lhs == 0 {
        return Ok(outcome);
    }
    let tr = TrustRegion::new(center, plan.trust_ratio).expect("plan validated");
    let design = lhs_sample(&LhsPlan::new(catalog.dimension(), plan.budgets.lhs, seeds::derive(plan.seed, "lhs", 0)));
    for v in design {
        outcome.trials += 1;
        if let Some(s) = ctx.run(Stage::Lhs, &tr.clip(&v))? {
            outcome.observe(&s);
        }
    }
    Ok(outcome)
}

/// Fits the forest on `(action, fitness)` and PCA on states of the given
/// samples.
pub fn fit_models(
    samples: &[&Sample],
    catalog: &KnobCatalog,
    plan: &RunPlan,
) -> Result<(Selection, ForestModel, PcaModel), PipelineError> {
    if samples.len() < 2 {
        return Err(ModelError::TooFewSamples { need: 2, got: samples.len() }.into());
    }
    let x: Vec<Vec<f64>> = samples.iter().map(|s| s.action.clone()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.fitness).collect();
    let forest =
        forest_fit(&ForestSpec { seed: seeds::derive(plan.seed, "forest", 0), ..ForestSpec::default() }, &x, &y)?;
    let k = plan.topk.min(catalog.dimension());
    let topk = select_topk(&forest.importances, k)?;
    let states: Vec<Vec<f64>> = samples.iter().map(|s| s.state.0.clone()).collect();
    let pca = pca_fit(&states, plan.pca)?;
    let selection = Selection {
        names: topk.iter().map(|&i| catalog.knobs()[i].name.clone()).collect(),
        topk,
        importances: forest.importances.clone(),
        forest_degenerate: forest.degenerate,
        pca_k: pca.k(),
        pca_ratios: pca.explained_variance_ratio.clone(),
        fitted_on: samples.len(),
    };
    Ok((selection, forest, pca))
}

struct Session<'a> {
    plan: &'a RunPlan,
    catalog: &'a KnobCatalog,
    hints: &'a [HintEntry],
    exec: &'a Execution,
    dir: Option<RunDir>,
}

impl Session<'_> {
    fn save_models(&self, sel: &Selection, forest: &ForestModel, pca: &PcaModel) -> Result<(), PipelineError> {
        if let Some(dir) = &self.dir {
            save_json(forest, dir.forest())?;
            save_json(pca, dir.pca())?;
            save_json(sel, dir.selection())?;
        }
        Ok(())
    }

    fn td3_config(&self) -> Td3Config {
        Td3Config { seed: seeds::derive(self.plan.seed, "td3", 0), ..self.exec.td3.clone().unwrap_or_default() }
    }

    /// Stage 2 from `base`, dispatched on the backend.
    fn stage2(
        &self,
        ctx: &mut TrialContext<'_>,
        backend: Backend,
        budget: usize,
        base: &Sample,
    ) -> Result<StageOutcome, Abort> {
        let seed = seeds::derive(self.plan.seed, "stage2", 0);
        match backend {
            Backend::Db => {
                let mut log = HintLog::default();
                hint_tune(ctx, self.hints, budget, &base.action, base.fitness, seed, &mut log)
            }
            Backend::Gp => {
                let space =
                    build_feasible_space(self.hints, self.catalog, &ctx.hardware).expect("hints checked non-empty");
                let mut log = CoarseLog::default();
                coarse_tune(ctx, &space, budget, &base.action, base.fitness, seed, &mut log)
            }
        }
    }

    fn stage3(
        &self,
        ctx: &mut TrialContext<'_>,
        fit_on: &dyn Fn(&Sample) -> bool,
    ) -> Result<Flow<(Option<Selection>, Option<String>)>, PipelineError> {
        if self.plan.budgets.td3 == 0 {
            return Ok(Flow::Done((None, None)));
        }
        let fit: Vec<&Sample> = ctx.visible().filter(|s| fit_on(s)).collect();
        let (sel, forest, pca) = fit_models(&fit, self.catalog, self.plan)?;
        self.save_models(&sel, &forest, &pca)?;
        let start = ctx
            .best_where(|s| !s.stale)
            .cloned()
            .ok_or_else(|| PipelineError::Missing("TD3 needs an evaluated starting configuration".into()))?;
        let (_, agent) =
            stage_try!(td3_tune(ctx, &pca, &sel.topk, self.plan.budgets.td3, &start, start.fitness, self.td3_config()));
        let mut checkpoint = None;
        if let (Some(dir), Some(agent)) = (&self.dir, agent) {
            agent.save(dir.agent(), false)?;
            checkpoint = Some("agent/agent.json".to_string());
        }
        Ok(Flow::Done((Some(sel), checkpoint)))
    }
}

fn prepare_dir(plan: &RunPlan, exec: &Execution) -> Result<Option<RunDir>, PipelineError> {
    let Some(out) = &exec.out else { return Ok(None) };
    let dir = RunDir::new(out);
    if dir.pool().exists() && !exec.resume {
        return Err(PipelineError::Plan(format!(
            "{} already holds a run; pass --resume to continue it",
            out.display()
        )));
    }
    dir.create()?;
    fs::write(dir.plan(), serde_json::to_string_pretty(plan)?)?;
    Ok(Some(dir))
}

fn open_pool(dir: &Option<RunDir>, exec: &Execution, fresh: SamplePool) -> Result<SamplePool, PipelineError> {
    match dir {
        Some(d) if exec.resume && d.pool().exists() => {
            let pool = SamplePool::open(d.pool())?;
            if pool.catalog_fingerprint() != fresh.catalog_fingerprint() || pool.hardware() != fresh.hardware() {
                return Err(PipelineError::Plan("existing pool was recorded for another catalog or hardware".into()));
            }
            Ok(pool)
        }
        Some(d) => {
            let mut pool = fresh;
            pool.save(d.pool())?;
            Ok(pool)
        }
        None => Ok(fresh),
    }
}

/// Runs stages 1 to 3 as configured. With `exec.resume`, trials already in
/// the run directory's pool are replayed instead of re-evaluated.
pub fn run_pipeline(plan: &RunPlan, inputs: &mut RunInputs, exec: &Execution) -> Result<RunStatus, PipelineError> {
    plan.validate()?;
    if plan.transfer_from.is_some() {
        return Err(PipelineError::Plan("transfer plans run through semi_transfer".into()));
    }
    if plan.budgets.stage2 > 0 && inputs.hints.is_empty() {
        return Err(PipelineError::Missing("stage 2 needs a hint file (--hints)".into()));
    }
    let dir = prepare_dir(plan, exec)?;
    let mut pool = open_pool(&dir, exec, SamplePool::new(&inputs.catalog, plan.hardware.clone()))?;
    let RunInputs { catalog, schema, env, hints } = inputs;
    let session = Session { plan, catalog, hints, exec, dir: dir.clone() };
    let flow = {
        let mut ctx =
            TrialContext::new(env.as_mut(), schema, &plan.workload, &mut pool, plan.seed).stop_after(exec.stop_after);
        drive_full(&session, &mut ctx)?
    };
    finish(flow, plan, &pool, catalog, dir)
}

fn drive_full(
    session: &Session<'_>,
    ctx: &mut TrialContext<'_>,
) -> Result<Flow<(Option<Selection>, Option<String>)>, PipelineError> {
    let plan = session.plan;
    stage_try!(run_stage1(ctx, plan));
    if plan.budgets.stage2 > 0 {
        let base = ctx
            .best_where(|s| !s.stale)
            .cloned()
            .ok_or_else(|| PipelineError::Missing("stage 2 needs at least one evaluated sample".into()))?;
        stage_try!(session.stage2(ctx, plan.stage2, plan.budgets.stage2, &base));
    }
    session.stage3(ctx, &|s: &Sample| s.stage == Stage::Lhs && !s.stale)
}

fn finish(
    flow: Flow<(Option<Selection>, Option<String>)>,
    plan: &RunPlan,
    pool: &SamplePool,
    catalog: &KnobCatalog,
    dir: Option<RunDir>,
) -> Result<RunStatus, PipelineError> {
    let (selection, checkpoint) = match flow {
        Flow::Stopped(n) => return Ok(RunStatus::Stopped(n)),
        Flow::Done(v) => v,
    };
    let report = emit_report(plan, pool, catalog, selection, checkpoint)?;
    if let Some(d) = &dir {
        write_report(d, &report)?;
    }
    Ok(RunStatus::Completed(Box::new(report)))
}

/// Builds the report from the pool alone (plus model artifacts), so that
/// re-emitting it later gives identical output.
pub fn emit_report(
    plan: &RunPlan,
    pool: &SamplePool,
    catalog: &KnobCatalog,
    selection: Option<Selection>,
    agent_checkpoint: Option<String>,
) -> Result<RunReport, PipelineError> {
    let fresh: Vec<&Sample> = pool.samples().iter().filter(|s| !s.stale).collect();
    let series: Vec<SeriesRow> = fresh
        .iter()
        .map(|s| SeriesRow {
            trial: s.trial,
            stage: s.stage,
            fitness: s.fitness,
            tps: s.perf.tps,
            p95_ms: s.perf.p95_latency_ms,
            qps: s.perf.qps,
            wall_s: s.wall_s,
        })
        .collect();
    let failed_trials = match (fresh.first(), fresh.last()) {
        (Some(a), Some(b)) => {
            let have: std::collections::HashSet<u64> = fresh.iter().map(|s| s.trial).collect();
            (a.trial..=b.trial).filter(|t| !have.contains(t)).collect()
        }
        _ => Vec::new(),
    };

    let transfer = plan.transfer_from.is_some();
    let mut stage_list: Vec<(Stage, String, usize)> = Vec::new();
    if !transfer {
        stage_list.push((Stage::Lhs, "lhs".into(), plan.budgets.lhs));
    }
    let backend = if transfer { Backend::Db } else { plan.stage2 };
    let stage2_budget = if transfer { plan.budgets.stage2.max(1) } else { plan.budgets.stage2 };
    stage_list.push((backend.stage(), backend.stage().to_string(), stage2_budget));
    stage_list.push((Stage::Td3, "td3".into(), plan.budgets.td3));

    let mut stages = Vec::new();
    let mut best: Option<(usize, &Sample)> = None;
    let mut pos = 0;
    for (stage, name, budget) in stage_list {
        let mut trials = 0;
        let mut stage_best: Option<f64> = None;
        while pos < fresh.len() && fresh[pos].stage == stage {
            let s = fresh[pos];
            trials += 1;
            stage_best = Some(stage_best.map_or(s.fitness, |b: f64| b.max(s.fitness)));
            if best.map_or(true, |(_, b)| s.fitness > b.fitness) {
                best = Some((pos, s));
            }
            pos += 1;
        }
        stages.push(StageSummary {
            stage: name,
            budget,
            trials,
            stage_best,
            best_so_far: best.map(|(_, s)| s.fitness),
            steps_to_best: best.map(|(i, _)| i + 1),
        });
    }
    if pos != fresh.len() {
        return Err(PipelineError::Plan("pool stages are out of pipeline order".into()));
    }
    let best = match best {
        Some((_, s)) => Some(BestConfig {
            trial: s.trial,
            stage: s.stage,
            fitness: s.fitness,
            tps: s.perf.tps,
            p95_ms: s.perf.p95_latency_ms,
            qps: s.perf.qps,
            action: s.action.clone(),
            physical: catalog.denormalize(&s.action)?.physical,
        }),
        None => None,
    };
    Ok(RunReport {
        seed: plan.seed,
        backend,
        transfer,
        total_budget: if transfer {
            stage2_budget + plan.budgets.td3
        } else {
            plan.budgets.lhs + plan.budgets.stage2 + plan.budgets.td3
        },
        series,
        failed_trials,
        stages,
        best,
        selection,
        agent_checkpoint,
    })
}

pub fn series_csv(report: &RunReport) -> String {
    let mut out = String::from("trial,stage,fitness,tps,p95_ms,qps,wall_s\n");
    for r in &report.series {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", r.trial, r.stage, r.fitness, r.tps, r.p95_ms, r.qps, r.wall_s);
    }
    out
}

pub fn write_report(dir: &RunDir, report: &RunReport) -> Result<(), PipelineError> {
    fs::write(dir.report(), serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(dir.series(), series_csv(report))?;
    Ok(())
}

/// Rebuilds `report.json` and `series.csv` from a finished run directory.
pub fn reemit_report(root: impl AsRef<Path>) -> Result<RunReport, PipelineError> {
    let dir = RunDir::new(root.as_ref());
    let plan: RunPlan = serde_json::from_str(&fs::read_to_string(dir.plan())?)?;
    let catalog = KnobCatalog::load(&plan.catalog)?;
    let pool = SamplePool::load(dir.pool())?;
    pool.check_catalog(&catalog)?;
    let selection = if dir.selection().exists() { Some(load_json::<Selection>(dir.selection())?) } else { None };
    let checkpoint = dir.agent().exists().then(|| "agent/agent.json".to_string());
    let report = emit_report(&plan, &pool, &catalog, selection, checkpoint)?;
    write_report(&dir, &report)?;
    Ok(report)
}

/// Reuses a finished run on new hardware: the old pool is migrated and
/// marked stale, the best old configuration is re-measured (one trial of
/// the stage-2 budget), then the hint stage and TD3 run with short
/// budgets. Models are refit on the migrated warm-start samples.
pub fn semi_transfer(
    old_pool: &SamplePool,
    old_catalog: &KnobCatalog,
    plan: &RunPlan,
    inputs: &mut RunInputs,
    exec: &Execution,
) -> Result<RunStatus, PipelineError> {
    plan.validate()?;
    if inputs.hints.is_empty() {
        return Err(PipelineError::Missing("semi-transfer needs a hint file (--hints)".into()));
    }
    if !old_pool.samples().iter().any(|s| s.stage == Stage::Lhs) {
        return Err(PipelineError::Missing("the old run has no warm-start samples".into()));
    }
    let migrated = migrate_pool(old_pool, old_catalog, plan.hardware.clone(), &inputs.catalog)?;
    let first_new = migrated.last_trial().map_or(0, |t| t + 1);
    let baseline = migrated
        .best_where(|s| s.stale)
        .map_err(|_| PipelineError::Missing("old pool is empty".into()))?
        .action
        .clone();
    let dir = prepare_dir(plan, exec)?;
    let mut pool = open_pool(&dir, exec, migrated)?;
    let RunInputs { catalog, schema, env, hints } = inputs;
    let session = Session { plan, catalog, hints, exec, dir: dir.clone() };
    let flow = {
        let mut ctx = TrialContext::new(env.as_mut(), schema, &plan.workload, &mut pool, plan.seed)
            .starting_at(first_new)
            .stop_after(exec.stop_after);
        drive_transfer(&session, &mut ctx, &baseline)?
    };
    finish(flow, plan, &pool, catalog, dir)
}

fn drive_transfer(
    session: &Session<'_>,
    ctx: &mut TrialContext<'_>,
    baseline: &[f64],
) -> Result<Flow<(Option<Selection>, Option<String>)>, PipelineError> {
    let plan = session.plan;
    let base = match stage_try!(ctx.run(Stage::Hint, baseline)) {
        Some(s) => s,
        None => return Err(PipelineError::Missing("re-evaluating the migrated baseline failed".into())),
    };
    let remaining = plan.budgets.stage2.saturating_sub(1);
    stage_try!(session.stage2(ctx, Backend::Db, remaining, &base));
    session.stage3(ctx, &|s: &Sample| s.stage == Stage::Lhs)
}

/// Loads a finished run directory for semi-transfer.
pub fn load_old_run(root: impl AsRef<Path>) -> Result<(RunPlan, SamplePool, KnobCatalog), PipelineError> {
    let dir = RunDir::new(root.as_ref());
    if !dir.pool().exists() {
        return Err(PipelineError::Missing(format!("{} has no pool.jsonl", dir.root.display())));
    }
    let plan: RunPlan = serde_json::from_str(&fs::read_to_string(dir.plan())?)?;
    let catalog = KnobCatalog::load(&plan.catalog)?;
    let pool = SamplePool::load(dir.pool())?;
    pool.check_catalog(&catalog)?;
    Ok((plan, pool, catalog))
}

/// Refits the forest and PCA on every non-stale sample of a run directory
/// and stores them beside the stage-3 models as `refit_*.json`.
pub fn refit(root: impl AsRef<Path>, topk: Option<usize>, pca: Option<PcaTarget>) -> Result<Selection, PipelineError> {
    let dir = RunDir::new(root.as_ref());
    let mut plan: RunPlan = serde_json::from_str(&fs::read_to_string(dir.plan())?)?;
    if let Some(k) = topk {
        plan.topk = k;
    }
    if let Some(t) = pca {
        plan.pca = t;
    }
    plan.validate()?;
    let catalog = KnobCatalog::load(&plan.catalog)?;
    let pool = SamplePool::load(dir.pool())?;
    pool.check_catalog(&catalog)?;
    let fresh: Vec<&Sample> = pool.samples().iter().filter(|s| !s.stale).collect();
    let (sel, forest, model) = fit_models(&fresh, &catalog, &plan)?;
    fs::create_dir_all(dir.models())?;
    save_json(&forest, dir.models().join("refit_forest.json"))?;
    save_json(&model, dir.models().join("refit_pca.json"))?;
    save_json(&sel, dir.models().join("refit_selection.json"))?;
    Ok(sel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_source_parsing() {
        assert_eq!(EnvSource::parse("synthetic:envs/a.json").unwrap(), EnvSource::Synthetic("envs/a.json".into()));
        assert_eq!(
            EnvSource::parse("driver:python3 drv.py --x").unwrap(),
            EnvSource::Driver("python3 drv.py --x".into())
        );
        assert!(EnvSource::parse("docker:x").is_err());
        assert!(EnvSource::parse("synthetic:").is_err());
    }
}
