use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use knobtune::environment::{DriverRequest, DriverResponse};
use knobtune::pipeline::{self, load_old_run, reemit_report, refit, RunDir, RunReport};
use knobtune::{
    Backend, Budgets, EnvSource, Environment, Execution, HardwareProfile, KnobCatalog, MetricSchema, PcaTarget,
    RunInputs, RunPlan, RunStatus, SyntheticEnv, SyntheticModel, SyntheticModelSpec, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "knobtune", version, about = "Staged database knob tuning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run LHS warm start, the knowledge stage and TD3 fine-tuning.
    Tune(TuneArgs),
    /// Reuse a finished run on new hardware.
    Transfer(TransferArgs),
    /// Rebuild report.json and series.csv from a run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Numeric optimum of a synthetic environment.
    Oracle(OracleArgs),
    /// Refit the forest and PCA on every sample of a run.
    Refit {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        topk: Option<usize>,
        #[command(flatten)]
        pca: PcaArgs,
    },
    /// Serve a synthetic environment over the driver protocol on stdio.
    #[command(hide = true)]
    Drive(DriveArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Db,
    Gp,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Db => Backend::Db,
            BackendArg::Gp => Backend::Gp,
        }
    }
}

#[derive(Args, Default)]
#[group(multiple = false)]
struct PcaArgs {
    /// Keep the fewest components explaining this variance fraction.
    #[arg(long)]
    pca_var: Option<f64>,
    /// Keep exactly this many components.
    #[arg(long)]
    pca_k: Option<usize>,
}

impl PcaArgs {
    fn target(&self) -> Option<PcaTarget> {
        match (self.pca_var, self.pca_k) {
            (Some(f), _) => Some(PcaTarget::Variance(f)),
            (_, Some(k)) => Some(PcaTarget::Components(k)),
            _ => None,
        }
    }
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// synthetic:<spec.json> or driver:<command>
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    hardware: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "db")]
    stage2: BackendArg,
    #[arg(long)]
    hints: Option<PathBuf>,
    #[arg(long, default_value_t = 120)]
    budget_lhs: usize,
    /// Defaults to 5 for db and 50 for gp.
    #[arg(long)]
    budget_stage2: Option<usize>,
    #[arg(long, default_value_t = 30)]
    budget_td3: usize,
    #[arg(long, default_value_t = 0.05)]
    trust_ratio: f64,
    #[arg(long, default_value_t = 20)]
    topk: usize,
    #[command(flatten)]
    pca: PcaArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Continue the run stored in --out; other plan flags are ignored.
    #[arg(long)]
    resume: bool,
    /// Halt after this trial index has been issued.
    #[arg(long)]
    stop_after: Option<u64>,
    /// Seconds to wait for one driver reply.
    #[arg(long, default_value_t = 600.0)]
    driver_timeout: f64,
}

#[derive(Args)]
struct TransferArgs {
    /// Finished run directory to migrate from.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long)]
    hardware: Option<PathBuf>,
    /// New catalog; defaults to the old run's.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    hints: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    budget_stage2: usize,
    #[arg(long, default_value_t = 15)]
    budget_td3: usize,
    #[arg(long)]
    topk: Option<usize>,
    #[command(flatten)]
    pca: PcaArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    stop_after: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    /// synthetic:<spec.json>
    #[arg(long)]
    env: String,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    workload: PathBuf,
    /// Overrides the hardware written in the spec.
    #[arg(long)]
    hardware: Option<PathBuf>,
}

#[derive(Args)]
struct DriveArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    hardware: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn absolute(path: &Path) -> Result<String> {
    let p = fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
    Ok(p.to_string_lossy().into_owned())
}

fn resolve_env(spec: &str) -> Result<EnvSource> {
    Ok(match EnvSource::parse(spec)? {
        EnvSource::Synthetic(p) => EnvSource::Synthetic(absolute(Path::new(&p))?),
        d => d,
    })
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().with_context(|| format!("--{flag} is required"))
}

fn stored_plan(out: &Path) -> Result<Option<RunPlan>> {
    let dir = RunDir::new(out);
    if dir.plan().exists() {
        Ok(Some(read_json(&dir.plan())?))
    } else {
        Ok(None)
    }
}

fn tune(a: TuneArgs) -> Result<()> {
    let plan = match stored_plan(&a.out)? {
        Some(p) if a.resume => {
            info!("resuming the run stored in {}", a.out.display());
            p
        }
        _ => {
            let backend = Backend::from(a.stage2);
            RunPlan {
                catalog: absolute(required(&a.catalog, "catalog")?)?,
                schema: absolute(required(&a.schema, "schema")?)?,
                env: resolve_env(required(&a.env, "env")?)?,
                workload: read_json::<WorkloadSpec>(required(&a.workload, "workload")?)?,
                hardware: read_json::<HardwareProfile>(required(&a.hardware, "hardware")?)?,
                stage2: backend,
                hints: a.hints.as_deref().map(absolute).transpose()?,
                budgets: Budgets {
                    lhs: a.budget_lhs,
                    stage2: a.budget_stage2.unwrap_or(backend.default_budget()),
                    td3: a.budget_td3,
                },
                trust_ratio: a.trust_ratio,
                topk: a.topk,
                pca: a.pca.target().unwrap_or(PcaTarget::Variance(0.95)),
                seed: a.seed,
                driver_timeout_s: a.driver_timeout,
                transfer_from: None,
            }
        }
    };
    let mut inputs = RunInputs::load(&plan)?;
    let exec = Execution { out: Some(a.out.clone()), resume: a.resume, stop_after: a.stop_after, td3: None };
    let status = pipeline::run_pipeline(&plan, &mut inputs, &exec)?;
    finish(status, &a.out)
}

fn transfer(a: TransferArgs) -> Result<()> {
    let plan = match stored_plan(&a.out)? {
        Some(p) if a.resume => p,
        _ => {
            let from = required(&a.from, "from")?;
            let (old, _, _) = load_old_run(from)?;
            let mut plan = RunPlan {
                hardware: read_json(required(&a.hardware, "hardware")?)?,
                stage2: Backend::Db,
                budgets: Budgets { lhs: 0, stage2: a.budget_stage2, td3: a.budget_td3 },
                transfer_from: Some(absolute(from)?),
                ..old
            };
            if let Some(c) = &a.catalog {
                plan.catalog = absolute(c)?;
            }
            if let Some(e) = &a.env {
                plan.env = resolve_env(e)?;
            }
            if let Some(h) = &a.hints {
                plan.hints = Some(absolute(h)?);
            }
            if let Some(k) = a.topk {
                plan.topk = k;
            }
            if let Some(t) = a.pca.target() {
                plan.pca = t;
            }
            if let Some(s) = a.seed {
                plan.seed = s;
            }
            plan
        }
    };
    let from = plan.transfer_from.clone().context("stored plan is not a transfer plan")?;
    let (_, old_pool, old_catalog) = load_old_run(&from)?;
    let mut inputs = RunInputs::load(&plan)?;
    let exec = Execution { out: Some(a.out.clone()), resume: a.resume, stop_after: a.stop_after, td3: None };
    let status = pipeline::semi_transfer(&old_pool, &old_catalog, &plan, &mut inputs, &exec)?;
    finish(status, &a.out)
}

fn finish(status: RunStatus, out: &Path) -> Result<()> {
    match status {
        RunStatus::Stopped(n) => {
            println!("stopped after trial {n}; continue with --resume --out {}", out.display());
        }
        RunStatus::Completed(report) => print_summary(&report, out),
    }
    Ok(())
}

fn print_summary(r: &RunReport, out: &Path) {
    println!(
        "{:<8} {:>6} {:>6} {:>12} {:>12} {:>8}",
        "stage", "budget", "trials", "stage best", "best so far", "steps"
    );
    for s in &r.stages {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        println!(
            "{:<8} {:>6} {:>6} {:>12} {:>12} {:>8}",
            s.stage,
            s.budget,
            s.trials,
            f(s.stage_best),
            f(s.best_so_far),
            s.steps_to_best.map_or("-".to_string(), |n| n.to_string())
        );
    }
    if let Some(b) = &r.best {
        println!(
            "best: trial {} ({}) fitness {:.2} tps {:.1} p95 {:.2} ms",
            b.trial, b.stage, b.fitness, b.tps, b.p95_ms
        );
    }
    if !r.failed_trials.is_empty() {
        println!("failed trials: {:?}", r.failed_trials);
    }
    println!("report written to {}", out.display());
}

fn oracle(a: OracleArgs) -> Result<()> {
    let EnvSource::Synthetic(spec_path) = EnvSource::parse(&a.env)? else {
        bail!("the oracle needs a synthetic environment");
    };
    let catalog = KnobCatalog::load(&a.catalog)?;
    let mut spec = SyntheticModelSpec::load(&spec_path)?;
    if let Some(h) = &a.hardware {
        spec = spec.with_hardware(read_json(h)?);
    }
    let workload: WorkloadSpec = read_json(&a.workload)?;
    let model = SyntheticModel::new(spec, catalog.clone())?;
    let (v, f) = model.optimum(&workload);
    let physical = catalog.denormalize(&v)?.physical;
    let influential: BTreeMap<&str, &knobtune::KnobValue> = model
        .influential_indices()
        .into_iter()
        .map(|i| {
            let name = catalog.knobs()[i].name.as_str();
            (name, &physical[name])
        })
        .collect();
    let out = serde_json::json!({
        "fitness": f,
        "upper_bound": model.fitness_upper_bound(&workload),
        "influential": influential,
        "action": v,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn drive(a: DriveArgs) -> Result<()> {
    let catalog = KnobCatalog::load(&a.catalog)?;
    let schema = MetricSchema::load(&a.schema)?;
    let mut spec = SyntheticModelSpec::load(&a.spec)?;
    if let Some(h) = &a.hardware {
        spec = spec.with_hardware(read_json(h)?);
    }
    let mut env = SyntheticEnv::from_spec(spec, catalog.clone(), schema)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serve(&mut env, &catalog, &line) {
            Ok(r) => r,
            Err(e) => DriverResponse { frames: None, perf: None, error: Some(format!("{e:#}")) },
        };
        writeln!(out, "{}", serde_json::to_string(&reply)?)?;
        out.flush()?;
    }
    Ok(())
}

fn serve(env: &mut SyntheticEnv, catalog: &KnobCatalog, line: &str) -> Result<DriverResponse> {
    let req: DriverRequest = serde_json::from_str(line)?;
    if req.op != "evaluate" {
        bail!("unsupported op `{}`", req.op);
    }
    let seed = u64::from_str_radix(&req.trial_id, 16).context("trial_id must be hex")?;
    let config = catalog.configuration_from_physical(req.config)?;
    let obs = env.evaluate(&config, &req.workload, seed)?;
    Ok(DriverResponse { frames: Some(obs.frames), perf: Some(obs.perf), error: None })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Tune(a) => tune(a),
        Command::Transfer(a) => transfer(a),
        Command::Report { out } => {
            let r = reemit_report(&out)?;
            print_summary(&r, &out);
            Ok(())
        }
        Command::Oracle(a) => oracle(a),
        Command::Refit { out, topk, pca } => {
            let sel = refit(&out, topk, pca.target())?;
            println!("refit on {} samples; top {}:", sel.fitted_on, sel.topk.len());
            for (i, name) in sel.topk.iter().zip(&sel.names) {
                println!("  {:>4} {:<40} {:.4}", i, name, sel.importances[*i]);
            }
            println!("pca k = {}", sel.pca_k);
            Ok(())
        }
        Command::Drive(a) => drive(a),
    }
}
