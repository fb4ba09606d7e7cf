//! End-to-end checks against the built `lpcn` binary.

use std::process::{Command, Output};

fn lpcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpcn"))
        .args(args)
        .output()
        .expect("spawn lpcn")
}

fn run_ok(args: &[&str]) -> Vec<u8> {
    let out = lpcn(args);
    assert!(
        out.status.success(),
        "lpcn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

/// Criterion 9: repeated identical invocations produce byte-identical
/// reports, and parallel island scheduling changes nothing.
#[test]
fn criterion_9_report_determinism() {
    let base = [
        "run",
        "--synth",
        "sphere:n=512,f=2,seed=11",
        "--k",
        "16",
        "--centrals",
        "128",
        "--island-size",
        "16",
        "--neighbor",
        "bq:0.35",
        "--seed",
        "11",
        "--mode",
        "compensated",
    ];
    let first = run_ok(&base);
    let second = run_ok(&base);
    assert_eq!(first, second, "repeated runs differ");
    let mut with_parallel = base.to_vec();
    with_parallel.push("--parallel-islands");
    let parallel = run_ok(&with_parallel);
    assert_eq!(first, parallel, "--parallel-islands changes the report");
    println!("PASS criterion 9: byte-identical reports across reruns and --parallel-islands");
}

#[test]
fn structure_reports_subset_stats() {
    let out = run_ok(&[
        "structure",
        "--synth",
        "cube:n=256,seed=3",
        "--k",
        "8",
        "--centrals",
        "64",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["n"], 256);
    assert_eq!(v["m"], 64);
    assert_eq!(v["centrals"].as_array().unwrap().len(), 64);
}

#[test]
fn run_modes_agree_on_linear_models() {
    let model = "seed 5\nlayer 5 16 none\nlayer 16 8 none\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("linear.model");
    std::fs::write(&path, model).unwrap();
    let mut summaries: Vec<Vec<(u64, f64)>> = Vec::new();
    for mode in ["baseline", "compensated"] {
        let out = run_ok(&[
            "run",
            "--synth",
            "sphere:n=256,f=2,seed=9",
            "--k",
            "16",
            "--centrals",
            "64",
            "--model",
            path.to_str().unwrap(),
            "--mode",
            mode,
        ]);
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        summaries.push(
            v["results"]
                .as_array()
                .unwrap()
                .iter()
                .map(|r| (r["central"].as_u64().unwrap(), r["pooled_l1"].as_f64().unwrap()))
                .collect(),
        );
    }
    assert_eq!(summaries[0].len(), summaries[1].len());
    for (&(ca, la), &(cb, lb)) in summaries[0].iter().zip(&summaries[1]) {
        assert_eq!(ca, cb);
        assert!((la - lb).abs() <= 1e-5 * la.abs().max(1.0), "central {ca}: {la} vs {lb}");
    }
}

#[test]
fn missing_input_file_is_a_clean_error() {
    let out = lpcn(&["run", "--input", "/nonexistent/cloud.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn oversized_k_is_rejected() {
    let out = lpcn(&[
        "run",
        "--synth",
        "cube:n=64,seed=1",
        "--k",
        "128",
        "--centrals",
        "32",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
