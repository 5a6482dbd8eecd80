//! Constrained sampling with penalised kinetic Langevin dynamics.
//!
//! A convex constraint set `K` is replaced by the penalty `d_K(θ) / (2λ²)` added to
//! the potential, and the resulting unconstrained target is sampled with one of
//! three kinetic Langevin discretisations:
//!
//! * [`Scheme::Cubu`], the UBU splitting built on the exact OU flow,
//! * [`Scheme::Cbaoab`], the BAOAB splitting,
//! * [`Scheme::Cklmc`], the Euler-Maruyama discretisation.
//!
//! Gradients are either exact or stochastic (minibatch or additive noise).

pub mod bounds;
pub mod constraints;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod linalg;
pub mod metrics;
pub mod potentials;
pub mod random;

pub use constraints::{ConstraintSet, PenaltyParams, ProjectionKind, SetShape};
pub use error::{Error, Result};
pub use integrators::{GradientMode, IntegratorConfig, KineticState, Scheme, Trace};
pub use linalg::{Matrix, Vector};
pub use metrics::SampleSet;
pub use potentials::{PenalizedPotential, Potential, RegressionData, StochasticGradient};
