use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pan")).args(args).output().expect("spawn pan")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn generate(path: &Path, seed: &str) -> Output {
    pan(&[
        "generate-pointpattern",
        "--per-class", "6",
        "--nodes", "20..40",
        "--sweeps", "20",
        "--seed", seed,
        "--out", path.to_str().unwrap(),
    ])
}

fn write_config(dir: &Path, data: &Path) -> std::path::PathBuf {
    let cfg = dir.join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "[dataset]\npath = {:?}\nsplit = [0.6, 0.2, 0.2]\n\n[model]\nconv_dims = [8, 8]\nL = 2\nstandardize_inputs = true\n\n[optim]\nepochs = 3\nbatch_size = 4\nlr = 0.01\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn met_inspect_path_graph_random_walk() {
    let doc = stdout_json(&pan(&["met-inspect", "--graph-from", "p3", "--mode", "rw"]));
    let diag: Vec<f64> = serde_json::from_value(doc["diag"].clone()).unwrap();
    for (d, e) in diag.iter().zip([0.5, 0.6, 0.5]) {
        assert!((d - e).abs() < 1e-12, "{diag:?}");
    }
    assert!(doc["max_row_sum_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn centrality_star_selects_hub() {
    let doc = stdout_json(&pan(&["centrality", "--graph-from", "s3", "--measures", "dc", "--top-frac", "0.25"]));
    assert_eq!(doc["measures"]["dc"]["selected"], serde_json::json!([0]));
}

#[test]
fn missing_inputs_exit_with_usage_code() {
    assert_eq!(pan(&["train", "--config", "/nonexistent/exp.toml"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tmp.path().join("absent.pands"));
    assert_eq!(pan(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(pan(&["met-inspect", "--graph-from", "p3", "--mode", "bogus"]).status.code(), Some(2));
    assert_eq!(pan(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn bad_thread_env_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_pan"))
        .args(["met-inspect", "--graph-from", "p3"])
        .env("PAN_NUM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_train_evaluate_round() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.pands"), tmp.path().join("b.pands"));
    let info = stdout_json(&generate(&a, "5"));
    assert_eq!(info["graphs"], 18);
    stdout_json(&generate(&b, "5"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let cfg = write_config(tmp.path(), &a);
    let run = tmp.path().join("run");
    let report = stdout_json(&pan(&["train", "--config", cfg.to_str().unwrap(), "--out-dir", run.to_str().unwrap()]));
    for f in ["report.json", "metrics.csv", "checkpoint.panck"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let ck = run.join("checkpoint.panck");
    let ev = stdout_json(&pan(&[
        "evaluate",
        "--checkpoint", ck.to_str().unwrap(),
        "--dataset", a.to_str().unwrap(),
        "--split", "test",
        "--json",
    ]));
    assert_eq!(ev["n"], report["test_n"]);
    assert!((ev["metric"].as_f64().unwrap() - report["test_metric"].as_f64().unwrap()).abs() < 1e-12);

    let check = stdout_json(&pan(&["check-grad", "--config", cfg.to_str().unwrap(), "--graphs", "1"]));
    assert_eq!(check["pass"], true);
}
