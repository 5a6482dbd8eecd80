use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{emit_scatter, ExperimentConfig, MetricKind};
use crate::bounds::{self, ProblemConstants};
use crate::error::{Error, Result};
use crate::integrators::{run_chain, GradientMode, Scheme, Trace};
use crate::linalg::Vector;
use crate::metrics::{
    inside_fraction, rejection_sample_target, sha256_hex, wasserstein, MetricRecord, SampleSet,
};
use crate::potentials::PenalizedPotential;
use crate::random::{rng_stream, DATA_STREAM};

/// Pooled samples are thinned to this many points before exact matching against the
/// ground truth, which keeps the cubic assignment cost near a second.
pub const REPORT_MATCHED_POINTS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub trace_file: PathBuf,
    pub trace_sha256: String,
    pub gradient_evals: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeReport {
    pub scheme: Scheme,
    pub seeds: Vec<SeedRun>,
    pub samples: usize,
    /// One record per requested metric, in config order, on the pooled samples.
    pub metrics: Vec<MetricRecord>,
    pub scatter_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub runs: Vec<SchemeReport>,
    pub ground_truth: serde_json::Value,
    pub bounds: serde_json::Value,
    pub wall_seconds: f64,
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".part");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct ChainOutput {
    trace: Trace,
    csv: Vec<u8>,
    wall_seconds: f64,
}

fn run_one(
    cfg: &ExperimentConfig,
    pot: &PenalizedPotential,
    scheme: Scheme,
    seed: u64,
) -> Result<ChainOutput> {
    let start = Instant::now();
    let integrator = cfg.integrator(scheme)?;
    let trace =
        run_chain(None, cfg.iterations, &integrator, pot, seed).map_err(|e| Error::Seed {
            seed,
            source: Box::new(e),
        })?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    Ok(ChainOutput {
        trace,
        csv,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exact draws for the `W_q` metrics, or the reason there are none.
fn ground_truth(
    cfg: &ExperimentConfig,
    pot: &PenalizedPotential,
    size: usize,
) -> std::result::Result<SampleSet, String> {
    if pot.base().precision().is_none() {
        return Err("rejection ground truth needs a quadratic target".into());
    }
    if size == 0 {
        return Err("no samples".into());
    }
    let mut rng = rng_stream(cfg.seeds[0], DATA_STREAM);
    rejection_sample_target(pot.base(), pot.set(), size, &mut rng)
        .map(|r| r.samples)
        .map_err(|e| e.to_string())
}

fn pooled(cfg: &ExperimentConfig, traces: &[&Trace]) -> Vec<Vector> {
    traces
        .iter()
        .flat_map(|t| t.positions(1 + cfg.burn_in))
        .collect()
}

/// Thins `points` evenly to at most `cap`.
fn thin_to(points: &[Vector], cap: usize) -> Vec<Vector> {
    if points.len() <= cap {
        return points.to_vec();
    }
    (0..cap)
        .map(|i| points[i * points.len() / cap].clone())
        .collect()
}

fn metric(
    kind: MetricKind,
    samples: Option<&SampleSet>,
    pot: &PenalizedPotential,
    truth: &std::result::Result<SampleSet, String>,
    inputs: &str,
) -> Result<MetricRecord> {
    let name = kind.name();
    let Some(samples) = samples else {
        return Ok(MetricRecord::unavailable(name, inputs, "no samples"));
    };
    Ok(match kind {
        MetricKind::InsideFraction => MetricRecord::new(
            name,
            inputs,
            Some(inside_fraction(samples, pot.set())?),
            serde_json::json!({ "samples": samples.len() }),
        ),
        MetricKind::Mean => {
            let mean = samples.mean();
            MetricRecord::new(
                name,
                inputs,
                Some(mean.norm()),
                serde_json::json!({ "mean": mean.as_slice(), "value_is": "euclidean norm of the mean" }),
            )
        }
        MetricKind::W1 | MetricKind::W2 => {
            let q = if kind == MetricKind::W1 { 1.0 } else { 2.0 };
            match truth {
                Err(reason) => MetricRecord::unavailable(name, inputs, reason.clone()),
                Ok(truth) => {
                    let ours = SampleSet::new(thin_to(samples.points(), truth.len()))?;
                    MetricRecord::new(
                        name,
                        inputs,
                        Some(wasserstein(&ours, truth, q)?),
                        serde_json::json!({ "matched_points": ours.len() }),
                    )
                }
            }
        }
    })
}

fn bounds_block(cfg: &ExperimentConfig, pot: &PenalizedPotential) -> serde_json::Value {
    let sigma = match cfg.gradient.mode() {
        GradientMode::Full => (0.0, 0.0),
        GradientMode::Stochastic(sg) => sg.noise_levels(pot.base()),
    };
    match ProblemConstants::from_problem(pot, sigma) {
        Ok(c) => bounds::report(&c, cfg.gamma, cfg.h, cfg.iterations),
        Err(e) => serde_json::json!({ "unavailable": e.to_string() }),
    }
}

/// Runs every scheme on every seed, then writes traces, scatter plots, the ground truth
/// and `report.json` into `cfg.out`. Each file is written atomically; the report last.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let pot = cfg.potential()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let jobs: Vec<(Scheme, u64)> = cfg
        .scheme
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let outputs: Vec<ChainOutput> = jobs
        .par_iter()
        .map(|&(scheme, seed)| run_one(cfg, &pot, scheme, seed))
        .collect::<Result<_>>()?;

    let mut seed_runs = Vec::with_capacity(jobs.len());
    for (&(scheme, seed), out) in jobs.iter().zip(&outputs) {
        let file = PathBuf::from(format!("trace_{scheme}_seed{seed}.csv"));
        write_atomic(&cfg.out.join(&file), &out.csv)?;
        seed_runs.push(SeedRun {
            seed,
            trace_file: file,
            trace_sha256: sha256_hex(&out.csv),
            gradient_evals: out.trace.gradient_evals,
            wall_seconds: out.wall_seconds,
        });
    }

    let per_scheme = cfg.seeds.len();
    let pools: Vec<Vec<Vector>> = (0..cfg.scheme.len())
        .map(|i| {
            let traces: Vec<&Trace> = outputs[i * per_scheme..(i + 1) * per_scheme]
                .iter()
                .map(|o| &o.trace)
                .collect();
            pooled(cfg, &traces)
        })
        .collect();

    let wants_truth = cfg
        .metrics
        .iter()
        .any(|m| matches!(m, MetricKind::W1 | MetricKind::W2));
    let truth = if wants_truth {
        let size = pools
            .iter()
            .map(Vec::len)
            .min()
            .unwrap_or(0)
            .min(REPORT_MATCHED_POINTS);
        ground_truth(cfg, &pot, size)
    } else {
        Err("not requested".into())
    };
    let truth_json = match &truth {
        Ok(t) => {
            let mut bytes = Vec::new();
            t.write_csv(&mut bytes)?;
            write_atomic(&cfg.out.join("ground_truth.csv"), &bytes)?;
            serde_json::json!({ "file": "ground_truth.csv", "samples": t.len(), "sha256": sha256_hex(&bytes) })
        }
        Err(reason) => serde_json::json!({ "unavailable": reason }),
    };

    let mut runs = Vec::with_capacity(cfg.scheme.len());
    for (i, (&scheme, points)) in cfg.scheme.iter().zip(&pools).enumerate() {
        let seeds: Vec<SeedRun> = seed_runs[i * per_scheme..(i + 1) * per_scheme].to_vec();
        let inputs: String = seeds
            .iter()
            .map(|s| s.trace_sha256.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let samples = if points.is_empty() {
            None
        } else {
            Some(SampleSet::new(points.clone())?)
        };
        let metrics = cfg
            .metrics
            .iter()
            .map(|&k| {
                metric(
                    k,
                    samples.as_ref(),
                    &pot,
                    &truth,
                    &format!("{}:{inputs}", k.name()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let scatter_file = if pot.dim() == 2 {
            let file = PathBuf::from(format!("scatter_{scheme}.svg"));
            emit_scatter(points, pot.set(), &cfg.out.join(&file))?;
            Some(file)
        } else {
            None
        };
        runs.push(SchemeReport {
            scheme,
            samples: points.len(),
            seeds,
            metrics,
            scatter_file,
        });
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        runs,
        ground_truth: truth_json,
        bounds: bounds_block(cfg, &pot),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&report)?;
    write_atomic(&cfg.out.join("report.json"), &json)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::preset;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut cfg = preset("circle").unwrap();
        cfg.iterations = 50;
        cfg.seeds = vec![3, 4];
        cfg.out = dir.to_path_buf();
        cfg
    }

    #[test]
    fn report_lists_every_metric_once() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.runs.len(), 3);
        for run in &report.runs {
            let names: Vec<&str> = run.metrics.iter().map(|m| m.metric.as_str()).collect();
            assert_eq!(names, ["inside_fraction", "mean", "w1", "w2"]);
            assert!(run.metrics.iter().all(|m| m.value.is_some()));
            assert_eq!(run.samples, 100);
        }
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(json["bounds"]["constants"]["m_lambda"].is_number());
        assert!(!std::fs::read_dir(dir.path()).unwrap().any(|e| e
            .unwrap()
            .path()
            .extension()
            .is_some_and(|x| x == "part")));
    }

    #[test]
    fn zero_iterations_mark_metrics_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.iterations = 0;
        let report = run_experiment(&cfg).unwrap();
        for run in &report.runs {
            assert!(run
                .metrics
                .iter()
                .all(|m| m.value.is_none() && m.unavailable.is_some()));
        }
        let trace = std::fs::read_to_string(dir.path().join("trace_cubu_seed3.csv")).unwrap();
        assert_eq!(trace.lines().count(), 2);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&small(a.path())).unwrap();
        run_experiment(&small(b.path())).unwrap();
        for name in [
            "trace_cklmc_seed3.csv",
            "trace_cbaoab_seed4.csv",
            "ground_truth.csv",
            "scatter_cubu.svg",
        ] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn divergence_names_the_seed() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path());
        cfg.scheme = vec![Scheme::Cklmc];
        cfg.h = 3.0;
        cfg.lambda = 0.05;
        cfg.iterations = 500;
        match run_experiment(&cfg) {
            Err(Error::Seed { seed, source }) => {
                assert!(seed == 3 || seed == 4);
                assert!(matches!(*source, Error::Diverged { .. }));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(!dir.path().join("report.json").exists());
    }
}
