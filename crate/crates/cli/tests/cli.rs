use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", rel].iter().collect();
    p.canonicalize().unwrap().to_string_lossy().into_owned()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_knobtune"));
    c.env_remove("RUST_LOG").env("RUST_BACKTRACE", "0");
    c
}

fn ok(out: Output) -> String {
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn tune_args(out: &Path, env: &str, extra: &[&str]) -> Vec<String> {
    let mut a: Vec<String> = vec![
        "tune".into(),
        "--catalog".into(),
        repo("catalogs/synthetic50.json"),
        "--schema".into(),
        repo("schemas/innodb63.json"),
        "--env".into(),
        env.into(),
        "--workload".into(),
        repo("workloads/sysbench_rw.json"),
        "--hardware".into(),
        repo("hardware/12c64g.json"),
        "--hints".into(),
        repo("hints/synthetic50.json"),
        "--budget-lhs".into(),
        "20".into(),
        "--budget-td3".into(),
        "6".into(),
        "--seed".into(),
        "11".into(),
        "--out".into(),
        out.to_string_lossy().into_owned(),
    ];
    a.extend(extra.iter().map(|s| s.to_string()));
    a
}

fn synthetic() -> String {
    format!("synthetic:{}", repo("envs/synthetic50.json"))
}

#[test]
fn tune_then_report_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let stdout = ok(bin().args(tune_args(&out, &synthetic(), &[])).output().unwrap());
    assert!(stdout.contains("lhs") && stdout.contains("hint") && stdout.contains("td3"));
    let csv = fs::read_to_string(out.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 + 5 + 6);
    let report = fs::read(out.join("report.json")).unwrap();
    ok(bin().args(["report", "--out"]).arg(&out).output().unwrap());
    assert_eq!(fs::read(out.join("report.json")).unwrap(), report);
    let plan: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["budgets"]["stage2"], 5);
    assert_eq!(plan["pca"]["variance"], 0.95);
}

#[test]
fn stop_and_resume_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(bin().args(tune_args(&a, &synthetic(), &["--stage2", "gp", "--budget-stage2", "8"])).output().unwrap());
    let stopped = ok(bin()
        .args(tune_args(&b, &synthetic(), &["--stage2", "gp", "--budget-stage2", "8", "--stop-after", "22"]))
        .output()
        .unwrap());
    assert!(stopped.contains("stopped after trial 22"));
    assert!(!b.join("report.json").exists());
    ok(bin().args(["tune", "--resume", "--out"]).arg(&b).output().unwrap());
    for f in ["report.json", "series.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn driver_protocol_reproduces_in_process_run() {
    let tmp = tempfile::tempdir().unwrap();
    let direct = tmp.path().join("direct");
    let driven = tmp.path().join("driven");
    ok(bin().args(tune_args(&direct, &synthetic(), &[])).output().unwrap());
    let cmd = format!(
        "driver:{} drive --spec {} --catalog {} --schema {} --hardware {}",
        env!("CARGO_BIN_EXE_knobtune"),
        repo("envs/synthetic50.json"),
        repo("catalogs/synthetic50.json"),
        repo("schemas/innodb63.json"),
        repo("hardware/12c64g.json")
    );
    ok(bin().args(tune_args(&driven, &cmd, &[])).output().unwrap());
    // wall time is measured through the driver, everything else must agree
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p.join("series.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&direct), strip(&driven));
}

#[test]
fn transfer_refit_and_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let old = tmp.path().join("old");
    let new = tmp.path().join("new");
    ok(bin().args(tune_args(&old, &synthetic(), &[])).output().unwrap());
    let stdout = ok(bin()
        .args(["transfer", "--from"])
        .arg(&old)
        .args(["--hardware", &repo("hardware/12c32g.json"), "--budget-stage2", "4", "--budget-td3", "3", "--out"])
        .arg(&new)
        .output()
        .unwrap());
    assert!(stdout.contains("hint"));
    let csv = fs::read_to_string(new.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 + 3);
    assert!(csv.lines().skip(1).all(|l| !l.contains(",lhs,")));

    let refit = ok(bin().args(["refit", "--topk", "5", "--pca-k", "3", "--out"]).arg(&old).output().unwrap());
    assert!(refit.contains("refit on 31 samples"));
    assert!(old.join("models/refit_forest.json").exists());

    let oracle = ok(bin()
        .args([
            "oracle",
            "--env",
            &synthetic(),
            "--catalog",
            &repo("catalogs/synthetic50.json"),
            "--workload",
            &repo("workloads/sysbench_rw.json"),
        ])
        .output()
        .unwrap());
    let v: serde_json::Value = serde_json::from_str(&oracle).unwrap();
    let f = v["fitness"].as_f64().unwrap();
    assert!(f > 0.0 && f <= v["upper_bound"].as_f64().unwrap() + 1e-9);
    assert_eq!(v["influential"].as_object().unwrap().len(), 5);
}

#[test]
fn bad_invocations_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let o = bin().args(tune_args(&out, "docker:foo", &[])).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("synthetic:<spec.json> or driver:<command>"));

    let o = bin().args(tune_args(&out, &synthetic(), &["--pca-var", "0.9", "--pca-k", "3"])).output().unwrap();
    assert!(!o.status.success());

    let o = bin().args(["tune", "--out"]).arg(&out).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--catalog is required"));

    ok(bin().args(tune_args(&out, &synthetic(), &["--stop-after", "3"])).output().unwrap());
    let o = bin().args(tune_args(&out, &synthetic(), &[])).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--resume"));
}
