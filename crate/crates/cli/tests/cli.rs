use std::path::Path;
use std::process::{Command, Output};

fn ckld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckld"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "target": {"kind": "isotropic", "dim": 2, "k": 1.0},
        "constraint": {"kind": "ball", "radius": 0.5},
        "projection": "euclidean",
        "lambda": 0.2,
        "scheme": "cubu",
        "gradient": "full",
        "gamma": 2.0,
        "h": 0.05,
        "iterations": 100,
        "seeds": [0],
        "metrics": ["inside_fraction", "w1"],
        "out": dir.join("run"),
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn bounds_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let json = stdout_json(&ckld(&["bounds", "--config", cfg.to_str().unwrap()]));
    let b = &json["bounds"];
    assert_eq!(b["constants"]["osc_method"], "analytic");
    assert_eq!(b["surrogate_gap"]["w2"], "lambda*log^(1/q)(1/lambda)");
    assert!(b["cubu"]["bias"].is_number());
}

#[test]
fn bounds_schedule() {
    let json = stdout_json(&ckld(&["bounds", "--schedule", "3.1b", "--epsilon", "0.1"]));
    assert_eq!(json["schedule"]["n"], 1000);
    assert_eq!(json["schedule"]["p"], 3);
}

#[test]
fn sample_then_wasserstein() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        let out = ckld(&[
            "sample",
            "--preset",
            "circle",
            "--seed",
            seed,
            "--iterations",
            "40",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("step,theta_1,theta_2,v_1,v_2"));
    assert_eq!(text.lines().count(), 42);

    let same = ckld(&[
        "wasserstein",
        "--a",
        a.to_str().unwrap(),
        "--b",
        a.to_str().unwrap(),
    ]);
    assert!(same.status.success());
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim(), "0");

    let diff = ckld(&[
        "wasserstein",
        "--a",
        a.to_str().unwrap(),
        "--b",
        b.to_str().unwrap(),
        "--q",
        "1",
    ]);
    let w: f64 = String::from_utf8_lossy(&diff.stdout)
        .trim()
        .parse()
        .unwrap();
    assert!(w > 0.0);
}

#[test]
fn experiment_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let json = stdout_json(&ckld(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "2",
    ]));
    let runs = json["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["scheme"], "cubu");
    assert_eq!(runs[0]["samples"], 200);
    assert!(runs[0]["metrics"]["w1"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("run/report.json").exists());
    assert!(dir.path().join("run/trace_cubu_seed1.csv").exists());
}

#[test]
fn order_test_reports_slopes() {
    let json = stdout_json(&ckld(&[
        "order-test",
        "--kind",
        "weak",
        "--schemes",
        "cubu",
    ]));
    let slope = json["cubu"]["weak"]["fit"]["slope"].as_f64().unwrap();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
}

#[test]
fn bad_flags_exit_two() {
    let out = ckld(&["sample", "--preset", "circle", "--scheme", "leapfrog"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ckld(&["sample", "--preset", "circle", "--config", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_are_json_on_stderr() {
    let out = ckld(&["sample", "--preset", "hexagon"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string());
    assert!(err["message"].as_str().unwrap().contains("hexagon"));

    let out = ckld(&[
        "wasserstein",
        "--a",
        "/nonexistent/a.csv",
        "--b",
        "/nonexistent/b.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].is_string());

    let out = ckld(&[
        "sample",
        "--preset",
        "circle",
        "--h",
        "3",
        "--scheme",
        "cklmc",
        "--iterations",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "diverged");
}
