//! Experiment configuration, presets, runs and their on-disk artefacts.

mod run;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::constraints::{ConstraintSet, ProjectionKind};
use crate::error::{Error, Result};
use crate::integrators::{GradientMode, IntegratorConfig, Scheme, StepSchedule};
use crate::linalg::{matrix_from_rows, Vector};
use crate::potentials::{PenalizedPotential, Potential, RegressionData, StochasticGradient};
use crate::random::{rng_stream, DATA_STREAM};

pub use run::{
    run_experiment, write_atomic, ExperimentReport, SchemeReport, SeedRun, REPORT_MATCHED_POINTS,
};
pub use svg::emit_scatter;

pub const PRESETS: [&str; 4] = ["circle", "triangle", "square", "lasso"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// `f(θ) = k‖θ‖²/2`.
    Isotropic {
        dim: usize,
        k: f64,
    },
    Quadratic {
        precision: Vec<Vec<f64>>,
    },
    /// Least squares on a CSV with columns `a_1..a_p,y`.
    Regression {
        data: PathBuf,
    },
    /// Least squares on `n` draws of `y = θ⋆ᵀa + η`, `a ∼ N(0, I)`, `η ∼ N(0, noise_var)`.
    GeneratedRegression {
        n: usize,
        theta_star: Vec<f64>,
        noise_var: f64,
        seed: u64,
    },
}

impl TargetSpec {
    pub fn build(&self) -> Result<Potential> {
        match self {
            TargetSpec::Isotropic { dim, k } => Potential::isotropic(*dim, *k),
            TargetSpec::Quadratic { precision } => {
                Potential::quadratic(matrix_from_rows(precision)?)
            }
            TargetSpec::Regression { data } => {
                Potential::sum_of_losses(RegressionData::read_csv(data)?)
            }
            TargetSpec::GeneratedRegression {
                n,
                theta_star,
                noise_var,
                seed,
            } => {
                let mut rng = rng_stream(*seed, DATA_STREAM);
                let data = RegressionData::generate(
                    *n,
                    &Vector::from_row_slice(theta_star),
                    *noise_var,
                    &mut rng,
                )?;
                Potential::sum_of_losses(data)
            }
        }
    }
}

/// Constraint sets; a ball takes its dimension from the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Ball { radius: f64 },
    Ellipsoid { a: Vec<Vec<f64>> },
    LqBall { q: f64, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polytope { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl ConstraintSpec {
    pub fn build(&self, dim: usize) -> Result<ConstraintSet> {
        match self {
            ConstraintSpec::Ball { radius } => ConstraintSet::ball(dim, *radius),
            ConstraintSpec::Ellipsoid { a } => ConstraintSet::ellipsoid(matrix_from_rows(a)?),
            ConstraintSpec::LqBall { q, radius } => ConstraintSet::lq_ball(dim, *q, *radius),
            ConstraintSpec::Box { lower, upper } => {
                ConstraintSet::boxed(Vector::from_row_slice(lower), Vector::from_row_slice(upper))
            }
            ConstraintSpec::Polytope { a, b } => {
                ConstraintSet::polytope(matrix_from_rows(a)?, Vector::from_row_slice(b))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSpec {
    Euclidean,
    Gauge,
    Bregman(Vec<Vec<f64>>),
}

impl ProjectionSpec {
    pub fn build(&self) -> Result<ProjectionKind> {
        match self {
            ProjectionSpec::Euclidean => Ok(ProjectionKind::Euclidean),
            ProjectionSpec::Gauge => Ok(ProjectionKind::Gauge),
            ProjectionSpec::Bregman(q) => ProjectionKind::bregman(matrix_from_rows(q)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSpec {
    Full,
    Minibatch {
        batch_size: usize,
        #[serde(default)]
        with_replacement: bool,
    },
    AdditiveNoise {
        sigma1: f64,
    },
}

impl GradientSpec {
    pub fn mode(&self) -> GradientMode {
        match *self {
            GradientSpec::Full => GradientMode::Full,
            GradientSpec::Minibatch {
                batch_size,
                with_replacement,
            } => GradientMode::Stochastic(StochasticGradient::Minibatch {
                batch_size,
                with_replacement,
            }),
            GradientSpec::AdditiveNoise { sigma1 } => {
                GradientMode::Stochastic(StochasticGradient::AdditiveNoise { sigma1 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    InsideFraction,
    Mean,
    /// Against exact rejection samples of the constrained target.
    W1,
    W2,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::InsideFraction => "inside_fraction",
            MetricKind::Mean => "mean",
            MetricKind::W1 => "w1",
            MetricKind::W2 => "w2",
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Scheme>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Scheme),
        Many(Vec<Scheme>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub constraint: ConstraintSpec,
    pub projection: ProjectionSpec,
    pub lambda: f64,
    /// One scheme or a list; each runs on every seed.
    #[serde(deserialize_with = "one_or_many")]
    pub scheme: Vec<Scheme>,
    pub gradient: GradientSpec,
    pub gamma: f64,
    pub h: f64,
    #[serde(default)]
    pub schedule: Option<StepSchedule>,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    pub out: PathBuf,
    /// Leading post-initial states dropped before computing metrics.
    #[serde(default)]
    pub burn_in: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme.is_empty() {
            return Err(Error::param("scheme", "at least one scheme is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "at least one seed is required"));
        }
        let mut names: Vec<&str> = self.metrics.iter().map(MetricKind::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("metrics", "each metric may be listed once"));
        }
        for s in &self.scheme {
            IntegratorConfig::new(*s, self.h, self.gamma)?.with_schedule(self.schedule)?;
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PenalizedPotential> {
        let base = self.target.build()?;
        let set = self.constraint.build(base.dim())?;
        PenalizedPotential::new(base, set, self.projection.build()?, self.lambda)
    }

    pub fn integrator(&self, scheme: Scheme) -> Result<IntegratorConfig> {
        IntegratorConfig::new(scheme, self.h, self.gamma)?
            .with_gradient(self.gradient.mode())
            .with_schedule(self.schedule)
    }
}

fn toy(constraint: ConstraintSpec, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        target: TargetSpec::Isotropic { dim: 2, k: 1.0 },
        constraint,
        projection: ProjectionSpec::Gauge,
        lambda: 0.25,
        scheme: Scheme::ALL.to_vec(),
        gradient: GradientSpec::Full,
        gamma: 2.0,
        h: 0.1,
        schedule: None,
        iterations: 1000,
        seeds: (0..10).collect(),
        metrics: vec![MetricKind::InsideFraction, MetricKind::Mean],
        out: PathBuf::from("runs").join(name),
        burn_in: 0,
    }
}

/// Ready-made experiments. `lasso` generates its data to set `γ = 2√L`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "circle" => {
            let mut c = toy(ConstraintSpec::Ball { radius: 0.5 }, name);
            c.metrics.extend([MetricKind::W1, MetricKind::W2]);
            Ok(c)
        }
        "triangle" => Ok(toy(
            ConstraintSpec::Polytope {
                a: vec![vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
                b: vec![0.6, 0.3, 0.3],
            },
            name,
        )),
        "square" => Ok(toy(
            ConstraintSpec::Box {
                lower: vec![-0.3, -0.3],
                upper: vec![0.6, 0.6],
            },
            name,
        )),
        "lasso" => {
            let target = TargetSpec::GeneratedRegression {
                n: 10_000,
                theta_star: vec![1.0, 1.0],
                noise_var: 0.25,
                seed: 0,
            };
            let l = target.build()?.smoothness();
            Ok(ExperimentConfig {
                target,
                constraint: ConstraintSpec::Polytope {
                    a: vec![
                        vec![1.0, 1.0],
                        vec![1.0, -1.0],
                        vec![-1.0, 1.0],
                        vec![-1.0, -1.0],
                    ],
                    b: vec![1.0; 4],
                },
                projection: ProjectionSpec::Gauge,
                lambda: 1e-3,
                scheme: Scheme::ALL.to_vec(),
                gradient: GradientSpec::Full,
                gamma: 2.0 * l.sqrt(),
                h: 1e-5,
                schedule: Some(StepSchedule {
                    factor: 0.85,
                    period: 2000,
                }),
                iterations: 8000,
                seeds: (0..4).collect(),
                metrics: vec![MetricKind::InsideFraction, MetricKind::Mean],
                out: PathBuf::from("runs").join(name),
                burn_in: 2000,
            })
        }
        other => Err(Error::Unknown {
            kind: "preset",
            name: other.to_string(),
        }),
    }
}

/// The preset with its stochastic-gradient mode: 64 minibatches' worth of additive
/// noise on the toy targets, minibatches of 50 on the regression.
pub fn preset_sg(name: &str) -> Result<ExperimentConfig> {
    let mut c = preset(name)?;
    c.gradient = if name == "lasso" {
        GradientSpec::Minibatch {
            batch_size: 50,
            with_replacement: false,
        }
    } else {
        match StochasticGradient::batches(64) {
            StochasticGradient::AdditiveNoise { sigma1 } => GradientSpec::AdditiveNoise { sigma1 },
            StochasticGradient::Minibatch { .. } => unreachable!(),
        }
    };
    c.out.set_file_name(format!("{name}_sg"));
    Ok(c)
}
