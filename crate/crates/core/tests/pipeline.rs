//! End-to-end runs through files: config on disk, traces, samples and report.

use std::path::Path;

use constrained_kld::harness::{self, ExperimentConfig};
use constrained_kld::integrators::run_chain;
use constrained_kld::metrics::{inside_fraction, sha256_hex, wasserstein, SampleSet};
use constrained_kld::Scheme;

fn small_config(out: &Path) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "target": {{"kind": "isotropic", "dim": 2, "k": 1.0}},
            "constraint": {{"kind": "polytope", "a": [[1, 1], [-1, 0], [0, -1]], "b": [0.6, 0.3, 0.3]}},
            "projection": "gauge",
            "lambda": 0.25,
            "scheme": ["cubu", "cbaoab"],
            "gradient": {{"additive_noise": {{"sigma1": 0.125}}}},
            "gamma": 2.0,
            "h": 0.1,
            "iterations": 300,
            "seeds": [1, 2],
            "metrics": ["inside_fraction", "mean", "w2"],
            "out": {:?},
            "burn_in": 50
        }}"#,
        out.to_str().unwrap()
    );
    ExperimentConfig::from_json(&text).unwrap()
}

#[test]
fn trace_file_feeds_sample_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness::preset("square").unwrap();
    let pot = cfg.potential().unwrap();
    let trace = run_chain(None, 200, &cfg.integrator(Scheme::Cubu).unwrap(), &pot, 9).unwrap();
    let path = dir.path().join("trace.csv");
    let mut bytes = Vec::new();
    trace.write_csv(&mut bytes).unwrap();
    harness::write_atomic(&path, &bytes).unwrap();

    let read = SampleSet::read_csv(&path).unwrap();
    let direct = SampleSet::new(trace.positions(0)).unwrap();
    assert_eq!(read.len(), 201);
    assert_eq!(read.dim(), 2);
    // shortest round-trip float formatting makes the file exact
    assert_eq!(read.points(), direct.points());
    assert_eq!(wasserstein(&read, &direct, 2.0).unwrap(), 0.0);
    assert_eq!(
        inside_fraction(&read, pot.set()).unwrap(),
        inside_fraction(&direct, pot.set()).unwrap()
    );
}

#[test]
fn config_file_run_writes_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = small_config(&out);
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let loaded = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(loaded, cfg);

    let report = harness::run_experiment(&loaded).unwrap();
    assert_eq!(report.runs.len(), 2);
    for run in &report.runs {
        assert_eq!(run.samples, 2 * 250);
        for seed in &run.seeds {
            let bytes = std::fs::read(out.join(&seed.trace_file)).unwrap();
            assert_eq!(sha256_hex(&bytes), seed.trace_sha256);
        }
        let names: Vec<&str> = run.metrics.iter().map(|m| m.metric.as_str()).collect();
        assert_eq!(names, ["inside_fraction", "mean", "w2"]);
        let w2 = run.metrics[2].value.unwrap();
        assert!(w2 > 0.0 && w2 < 1.0, "{w2}");
        assert!(out.join(run.scatter_file.as_ref().unwrap()).exists());
    }

    let truth = SampleSet::read_csv(&out.join("ground_truth.csv")).unwrap();
    assert_eq!(truth.len(), 500);
    let set = cfg.potential().unwrap().set().clone();
    assert_eq!(inside_fraction(&truth, &set).unwrap(), 1.0);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["lambda"], 0.25);
    assert!(json["bounds"]["constants"]["sigma1"].as_f64().unwrap() > 0.0);
    // polyhedral gauges have no Hessian-Lipschitz constant, so no CUBU bias is reported
    assert!(json["bounds"]["cubu"]["bias"]["unavailable"].is_string());
}

#[test]
fn pooled_mean_matches_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let report = harness::run_experiment(&cfg).unwrap();
    let run = &report.runs[0];
    let mut points = Vec::new();
    for seed in &run.seeds {
        let samples = SampleSet::read_csv(&dir.path().join(&seed.trace_file)).unwrap();
        points.extend(samples.points()[1 + cfg.burn_in..].iter().cloned());
    }
    let mean = SampleSet::new(points).unwrap().mean();
    let reported = run.metrics[1].value.unwrap();
    assert!((mean.norm() - reported).abs() < 1e-12);
}
