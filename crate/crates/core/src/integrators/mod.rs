//! Kinetic Langevin integrators for the penalised potential.

mod chain;
mod noise;
mod operators;
mod schemes;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::potentials::{PenalizedPotential, StochasticGradient};

pub use chain::{run_chain, run_chain_with, run_coupled, CoupledRun, Trace, DIVERGENCE_THRESHOLD};
pub use noise::{BrownianPath, GaussianNoise, NoiseBlock, NoiseSource, PathNoise};
pub use operators::{op_a, op_b, op_o, op_u, OuCoefficients, OuIncrement};
pub use schemes::{step_cbaoab, step_cklmc, step_cubu, Stepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Cubu,
    Cbaoab,
    Cklmc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Cklmc, Scheme::Cubu, Scheme::Cbaoab];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Cubu => "cubu",
            Scheme::Cbaoab => "cbaoab",
            Scheme::Cklmc => "cklmc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cubu" | "ubu" => Ok(Scheme::Cubu),
            "cbaoab" | "baoab" => Ok(Scheme::Cbaoab),
            "cklmc" | "klmc" | "em" => Ok(Scheme::Cklmc),
            other => Err(Error::Unknown {
                kind: "scheme",
                name: other.to_string(),
            }),
        }
    }
}

/// Position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub theta: Vector,
    pub v: Vector,
}

impl KineticState {
    pub fn new(theta: Vector, v: Vector) -> Result<Self> {
        if theta.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                got: v.len(),
            });
        }
        if theta.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::param("state", "non-finite entry"));
        }
        Ok(Self { theta, v })
    }

    /// `θ = 0`, `v ∼ N(0, I)`.
    pub fn default_initial(dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            theta: Vector::zeros(dim),
            v: crate::random::standard_normal(rng, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Euclidean distance of the stacked `(θ, v)` vectors.
    pub fn distance(&self, other: &Self) -> f64 {
        ((&self.theta - &other.theta).norm_squared() + (&self.v - &other.v).norm_squared()).sqrt()
    }
}

/// Multiplicative step-size decay: `h_k = h·factor^{⌊k/period⌋}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub factor: f64,
    pub period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    Full,
    Stochastic(StochasticGradient),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub gradient: GradientMode,
    pub h: f64,
    pub gamma: f64,
    pub schedule: Option<StepSchedule>,
}

impl IntegratorConfig {
    pub fn new(scheme: Scheme, h: f64, gamma: f64) -> Result<Self> {
        let cfg = Self {
            scheme,
            gradient: GradientMode::Full,
            h,
            gamma,
            schedule: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gradient(mut self, gradient: GradientMode) -> Self {
        self.gradient = gradient;
        self
    }

    pub fn with_schedule(mut self, schedule: Option<StepSchedule>) -> Result<Self> {
        self.schedule = schedule;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param(
                "h",
                format!("must be positive, got {}", self.h),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if let Some(s) = self.schedule {
            if !(s.factor > 0.0 && s.factor <= 1.0) || s.period == 0 {
                return Err(Error::param(
                    "schedule",
                    "factor must lie in (0, 1] and period must be positive",
                ));
            }
        }
        Ok(())
    }

    /// `η = e^{−γh/2}`.
    pub fn eta(&self) -> f64 {
        (-self.gamma * self.h / 2.0).exp()
    }

    /// Step size used by step `k` (zero-based).
    pub fn step_size(&self, k: usize) -> f64 {
        match self.schedule {
            Some(s) => self.h * s.factor.powi((k / s.period) as i32),
            None => self.h,
        }
    }
}

/// Gradient of `U^λ`, exact or with the base gradient replaced by an estimator.
pub fn drift(
    pot: &PenalizedPotential,
    mode: &GradientMode,
    theta: &Vector,
    rng: &mut impl Rng,
) -> Result<Vector> {
    match mode {
        GradientMode::Full => pot.grad(theta),
        GradientMode::Stochastic(sg) => {
            Ok(sg.estimate(pot.base(), theta, rng)? + pot.penalty_grad(theta)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_steps() {
        let cfg = IntegratorConfig::new(Scheme::Cubu, 1e-5, 2.0)
            .unwrap()
            .with_schedule(Some(StepSchedule {
                factor: 0.85,
                period: 2000,
            }))
            .unwrap();
        assert_eq!(cfg.step_size(1999), 1e-5);
        assert!((cfg.step_size(2000) - 0.85e-5).abs() < 1e-20);
        assert!((cfg.step_size(7999) - 0.85f64.powi(3) * 1e-5).abs() < 1e-20);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(Scheme::Cubu, 0.0, 2.0).is_err());
        assert!(IntegratorConfig::new(Scheme::Cubu, 0.1, -1.0).is_err());
        let bad = IntegratorConfig::new(Scheme::Cubu, 0.1, 2.0)
            .unwrap()
            .with_schedule(Some(StepSchedule {
                factor: 1.5,
                period: 3,
            }));
        assert!(bad.is_err());
        assert!(
            (IntegratorConfig::new(Scheme::Cubu, 0.1, 2.0).unwrap().eta() - (-0.1f64).exp()).abs()
                < 1e-16
        );
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("leapfrog".parse::<Scheme>().is_err());
    }
}
