use rand::Rng;

use super::SampleSet;
use crate::constraints::ConstraintSet;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::potentials::Potential;
use crate::random::standard_normal;

/// Proposals drawn before the acceptance rate is judged.
pub const PROBE_BATCH: usize = 10_000;
/// Minimum acceptance rate over the probe batch.
pub const ACCEPTANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct RejectionSample {
    pub samples: SampleSet,
    pub proposals: usize,
    pub acceptance_rate: f64,
}

/// Exact draws from `e^{−f}·1_K` for a quadratic `f`, proposing from the unconstrained Gaussian.
pub fn rejection_sample_target(
    pot: &Potential,
    set: &ConstraintSet,
    n: usize,
    rng: &mut impl Rng,
) -> Result<RejectionSample> {
    check_dim(pot.dim(), set.dim())?;
    let precision = pot.precision().ok_or_else(|| {
        Error::Unsupported("rejection sampling needs a quadratic potential".into())
    })?;
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let cov = precision
        .clone()
        .cholesky()
        .expect("precision is positive definite")
        .inverse();
    let chol = cov.cholesky().expect("covariance is positive definite").l();
    let p = pot.dim();
    let mut accepted: Vec<Vector> = Vec::with_capacity(n);
    let mut proposals = 0usize;
    while accepted.len() < n {
        let x = &chol * standard_normal(rng, p);
        proposals += 1;
        if set.contains_unchecked(&x) {
            accepted.push(x);
        }
        if proposals == PROBE_BATCH {
            let rate = accepted.len() as f64 / proposals as f64;
            if rate < ACCEPTANCE_FLOOR {
                return Err(Error::AcceptanceTooLow {
                    rate,
                    floor: ACCEPTANCE_FLOOR,
                });
            }
        }
    }
    Ok(RejectionSample {
        samples: SampleSet::new(accepted)?,
        proposals,
        acceptance_rate: n as f64 / proposals as f64,
    })
}
