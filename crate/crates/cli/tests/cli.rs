use std::path::Path;
use std::process::{Command, Output};

const TINY_PLAN: &str = r#"
schedule = [50.0, 80.0]

[network]
epochs = 1
grad_noise = 0.35

[network.architecture]
input = [1, 1, 4]
classes = 2
layers = [
    { kind = "dense", rows = 4, cols = 4 },
    { kind = "relu", rows = 0, cols = 0 },
    { kind = "dense", rows = 2, cols = 4 },
    { kind = "softmax", rows = 0, cols = 0 },
]

[[tasks]]
name = "tiny"
kind = "blobs"
classes = 2
train_per_class = 8
test_per_class = 4
dims = 4
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ticket-lab")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn run_tiny(dir: &Path) -> std::path::PathBuf {
    let plan = dir.join("plan.toml");
    std::fs::write(&plan, TINY_PLAN).unwrap();
    let out_dir = dir.join("runs");
    let out = cli(&[
        "run",
        "--config",
        plan.to_str().unwrap(),
        "--seeds",
        "2",
        "--runs",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["records"], 6);
    out_dir
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&[]).status.code(), Some(1));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--regime", "chaotic", "--out", "x"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--schedule", "50,40", "--out", "x"]).status.code(), Some(1));
    let out = cli(&["baseline", "--model", "hypergeom", "--population", "10", "--tau", "11"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn baselines_print_json() {
    let out = cli(&["baseline", "--model", "hypergeom", "--population", "1000", "--tau", "100"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["mean"], 10.0);
    assert_eq!(v["interval"], serde_json::json!([5, 16]));

    let v = json(&cli(&["baseline", "--model", "shared", "--population", "100", "--tau", "50", "--k", "5"]));
    assert!((v["mean"].as_f64().unwrap() - 3.125).abs() < 1e-12);
    let v = json(&cli(&["baseline", "--model", "never", "--population", "100", "--tau", "50", "--k", "5"]));
    assert!((v["mean"].as_f64().unwrap() - 3.125).abs() < 1e-12);
    let out = cli(&["baseline", "--model", "mc", "--population", "100", "--tau", "50", "--trials", "1000"]);
    assert!(json(&out)["estimate"]["pairwise"]["mean"].as_f64().unwrap() > 20.0);
}

#[test]
fn run_compare_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = run_tiny(tmp.path());
    let reports = tmp.path().join("reports");
    let (r, o) = (runs.to_str().unwrap(), reports.to_str().unwrap());

    let within = json(&cli(&["compare", "--records", r, "--mode", "within", "--step", "0", "--out", o]));
    // 2 seeds × C(3, 2) pairs × 2 layers
    assert_eq!(within["stats"], 12);
    let csv = std::fs::read_to_string(reports.join("within-step0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(reports.join("within-step0.svg").exists());
    assert!(reports.join("shared-never-step0.csv").exists());

    let across = json(&cli(&["compare", "--records", r, "--mode", "across"]));
    // (C(6, 2) − 2·C(3, 2)) pairs × 2 layers
    assert_eq!(across["stats"], 18);
    assert_eq!(across["step"], 1);

    let cross = json(&cli(&["compare", "--records", r, "--mode", "cross-task", "--other", r, "--pairing", "cross-seed"]));
    assert_eq!(cross["stats"], 18);
    assert_eq!(cross["skipped_layers"], serde_json::json!([]));

    let out = cli(&["report", "--records", r, "--out", o]);
    assert!(out.status.success());
    let acc = std::fs::read_to_string(reports.join("accuracy.csv")).unwrap();
    // header + 6 runs × (dense + 2 steps)
    assert_eq!(acc.lines().count(), 19);
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    assert_eq!(cli(&["compare", "--records", missing.to_str().unwrap()]).status.code(), Some(2));

    let runs = run_tiny(tmp.path());
    let manifest = runs.join("records/tiny-s0-r0.json");
    std::fs::write(&manifest, "{ not json").unwrap();
    assert_eq!(cli(&["compare", "--records", runs.to_str().unwrap()]).status.code(), Some(2));

    let idx = cli(&["run", "--dataset", &format!("idx:{}", missing.display()), "--out", runs.to_str().unwrap()]);
    assert_eq!(idx.status.code(), Some(2));
}

#[test]
fn malformed_config_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("bad.toml");
    std::fs::write(&plan, "runs = \"many\"").unwrap();
    let out = cli(&["run", "--config", plan.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
