use std::path::Path;
use std::process::{Command, Output};

use ncrsm::io::{self, RunManifest};

const BIN: &str = env!("CARGO_BIN_EXE_ncrsm");

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/configs"))
}

fn ncrsm(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("NCRSM_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn simulate_scalar(dir: &Path, prefix: &str) -> Output {
    let config = configs().join("scalar.toml");
    ncrsm(dir, &["simulate", "--config", config.to_str().unwrap(), "--out", prefix])
}

#[test]
fn simulate_writes_data_truth_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_scalar(dir.path(), "run");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = io::read_trajectory(&dir.path().join("run.csv"), None).unwrap();
    assert_eq!(traj.len(), 2000);
    let (truth, manifest) = io::read_params(&dir.path().join("run.truth.json")).unwrap();
    assert_eq!(truth.dims().m_c, 2);
    assert_eq!(manifest.as_deref(), Some("run.manifest.json"));
    let m = RunManifest::read(&dir.path().join("run.manifest.json")).unwrap();
    assert_eq!(m.command, "simulate");
    assert_eq!(m.seeds, vec![7]);
    assert_eq!(m.outputs, vec!["run.csv", "run.truth.json"]);
}

#[test]
fn simulate_is_reproducible_and_seed_overridable() {
    let dir = tempfile::tempdir().unwrap();
    simulate_scalar(dir.path(), "a");
    simulate_scalar(dir.path(), "b");
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    // only the manifest line differs between prefixes
    let body = |s: String| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(read("a.csv")), body(read("b.csv")));

    let config = configs().join("scalar.toml");
    let out = Command::new(BIN)
        .args(["simulate", "--config", config.to_str().unwrap(), "--out", "c"])
        .current_dir(dir.path())
        .env("NCRSM_SEED", "8")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(body(read("a.csv")), body(read("c.csv")));
    assert_eq!(RunManifest::read(&dir.path().join("c.manifest.json")).unwrap().seeds, vec![8]);
}

#[test]
fn identify_evaluate_and_smooth_produce_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    simulate_scalar(dir.path(), "run");
    let fast = dir.path().join("fast.toml");
    std::fs::write(&fast, "seed = 3\nmax_iters = 5\nrestarts = 2\n").unwrap();
    let out = ncrsm(
        dir.path(),
        &["--jobs", "2", "identify", "--data", "run.csv", "--dims", "1,1,1,2,2", "--config", fast.to_str().unwrap(), "--out", "fit"],
    );
    // EM may stop on a failed ascent, which is reported as divergence
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.report.json")).unwrap()).unwrap();
    assert_eq!(report["manifest"], "fit.manifest.json");
    assert_eq!(report["s_c_hat"].as_array().unwrap().len(), 2000);
    let m = RunManifest::read(&dir.path().join("fit.manifest.json")).unwrap();
    assert_eq!(m.stop_reason.as_deref(), report["stop_reason"].as_str());
    assert!(m.input_hashes.contains_key("run.csv"));

    let out = ncrsm(
        dir.path(),
        &["evaluate", "--truth", "run.truth.json", "--estimate", "fit.params.json", "--data", "run.csv", "--out", "eval.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert!(eval.starts_with("# manifest=eval.csv.manifest.json\nmetric,mode,value\n"));
    assert!(eval.contains("\nmatch_c,0,"));

    let out = ncrsm(dir.path(), &["smooth", "--data", "run.csv", "--model", "run.truth.json", "--out", "smooth.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let smooth = std::fs::read_to_string(dir.path().join("smooth.csv")).unwrap();
    assert_eq!(smooth.lines().count(), 2002);
}

#[test]
fn divergent_simulation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("example1.toml");
    let out = ncrsm(dir.path(), &["simulate", "--config", config.to_str().unwrap(), "--out", "ex1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ncrsm(dir.path(), &["no-such-command"]).status.code(), Some(1));
    let out = ncrsm(dir.path(), &["smooth", "--data", "missing.csv", "--model", "m.json", "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.csv"), "t,y_1\n1,0.5\n2,NaN\n").unwrap();
    let out = ncrsm(dir.path(), &["identify", "--data", "bad.csv", "--dims", "1,1,1,1,1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3"));
    let out = ncrsm(dir.path(), &["benchmark", "--suite", "A42"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncrsm(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["simulate", "identify", "evaluate", "smooth", "benchmark"] {
        assert!(text.contains(cmd), "help lists {cmd}");
    }
}

#[test]
fn benchmark_runs_a_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncrsm(dir.path(), &["benchmark", "--suite", "A9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("A9   PASS"));
}
