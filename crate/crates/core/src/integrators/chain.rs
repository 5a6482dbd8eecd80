use std::io::Write;

use super::noise::{GaussianNoise, NoiseSource};
use super::schemes::Stepper;
use super::{drift, IntegratorConfig, KineticState, Scheme};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::potentials::PenalizedPotential;
use crate::random::{rng_stream, ChainRng, GRADIENT_STREAM, NOISE_STREAM};

/// A chain aborts once `‖θ‖` or `‖v‖` exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Recorded chain: `n + 1` states including the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub states: Vec<KineticState>,
    pub scheme: Scheme,
    pub h: f64,
    pub gamma: f64,
    pub seed: Option<u64>,
    pub gradient_evals: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &KineticState {
        self.states.last().expect("trace holds the initial state")
    }

    /// Positions after discarding the first `burn_in` states (the initial state counts as one).
    pub fn positions(&self, burn_in: usize) -> Vec<Vector> {
        self.states
            .iter()
            .skip(burn_in)
            .map(|s| s.theta.clone())
            .collect()
    }

    /// CSV with header `step,theta_1..theta_p,v_1..v_p`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let p = self.states.first().map_or(0, KineticState::dim);
        let mut header = vec!["step".to_string()];
        header.extend((1..=p).map(|i| format!("theta_{i}")));
        header.extend((1..=p).map(|i| format!("v_{i}")));
        w.write_record(&header)?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(s.theta.iter().map(|x| x.to_string()));
            row.extend(s.v.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))
    }
}

fn check_finite(state: &KineticState, step: usize) -> Result<()> {
    let tn = state.theta.norm();
    let vn = state.v.norm();
    if !(tn.is_finite() && vn.is_finite()) || tn > DIVERGENCE_THRESHOLD || vn > DIVERGENCE_THRESHOLD
    {
        return Err(Error::Diverged {
            step,
            theta_norm: tn,
            v_norm: vn,
        });
    }
    Ok(())
}

/// Runs `n` steps from `initial` with explicit noise and gradient streams.
pub fn run_chain_with(
    initial: KineticState,
    n: usize,
    config: &IntegratorConfig,
    pot: &PenalizedPotential,
    noise: &mut dyn NoiseSource,
    grad_rng: &mut ChainRng,
) -> Result<Trace> {
    config.validate()?;
    check_dim(pot.dim(), initial.dim())?;
    let p = initial.dim();
    let mut stepper = Stepper::new(config.scheme, config.gamma);
    let mut evals = 0usize;
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial);
    for k in 0..n {
        let h = config.step_size(k);
        let block = noise.next_block(config.scheme, h, config.gamma, p)?;
        let mut grad = |theta: &Vector| {
            evals += 1;
            drift(pot, &config.gradient, theta, grad_rng)
        };
        let next = stepper.step(states.last().expect("nonempty"), h, &mut grad, &block)?;
        check_finite(&next, k + 1)?;
        states.push(next);
    }
    Ok(Trace {
        states,
        scheme: config.scheme,
        h: config.h,
        gamma: config.gamma,
        seed: None,
        gradient_evals: evals,
    })
}

/// Runs `n` steps with the noise and gradient streams of `seed`. Without an explicit
/// initial state the chain starts at `θ = 0`, `v ∼ N(0, I)` drawn from the noise stream.
pub fn run_chain(
    initial: Option<KineticState>,
    n: usize,
    config: &IntegratorConfig,
    pot: &PenalizedPotential,
    seed: u64,
) -> Result<Trace> {
    let mut noise_rng = rng_stream(seed, NOISE_STREAM);
    let initial = match initial {
        Some(s) => s,
        None => KineticState::default_initial(pot.dim(), &mut noise_rng),
    };
    let mut noise = GaussianNoise::new(noise_rng);
    let mut grad_rng = rng_stream(seed, GRADIENT_STREAM);
    let mut trace = run_chain_with(initial, n, config, pot, &mut noise, &mut grad_rng)?;
    trace.seed = Some(seed);
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub a: Trace,
    pub b: Trace,
    /// Distance of the `(θ, v)` pairs at every step, starting with the initial states.
    pub distances: Vec<f64>,
}

/// Two chains driven by the same noise blocks and the same gradient randomness.
pub fn run_coupled(
    initial_a: KineticState,
    initial_b: KineticState,
    n: usize,
    config: &IntegratorConfig,
    pot: &PenalizedPotential,
    seed: u64,
) -> Result<CoupledRun> {
    config.validate()?;
    check_dim(pot.dim(), initial_a.dim())?;
    check_dim(pot.dim(), initial_b.dim())?;
    let p = pot.dim();
    let mut noise = GaussianNoise::new(rng_stream(seed, NOISE_STREAM));
    let mut rng_a = rng_stream(seed, GRADIENT_STREAM);
    let mut rng_b = rng_a.clone();
    let mut step_a = Stepper::new(config.scheme, config.gamma);
    let mut step_b = Stepper::new(config.scheme, config.gamma);
    let (mut evals_a, mut evals_b) = (0usize, 0usize);
    let mut distances = vec![initial_a.distance(&initial_b)];
    let mut states_a = vec![initial_a];
    let mut states_b = vec![initial_b];
    for k in 0..n {
        let h = config.step_size(k);
        let block = noise.next_block(config.scheme, h, config.gamma, p)?;
        let mut ga = |t: &Vector| {
            evals_a += 1;
            drift(pot, &config.gradient, t, &mut rng_a)
        };
        let na = step_a.step(states_a.last().expect("nonempty"), h, &mut ga, &block)?;
        let mut gb = |t: &Vector| {
            evals_b += 1;
            drift(pot, &config.gradient, t, &mut rng_b)
        };
        let nb = step_b.step(states_b.last().expect("nonempty"), h, &mut gb, &block)?;
        check_finite(&na, k + 1)?;
        check_finite(&nb, k + 1)?;
        distances.push(na.distance(&nb));
        states_a.push(na);
        states_b.push(nb);
    }
    let make = |states, evals| Trace {
        states,
        scheme: config.scheme,
        h: config.h,
        gamma: config.gamma,
        seed: Some(seed),
        gradient_evals: evals,
    };
    Ok(CoupledRun {
        a: make(states_a, evals_a),
        b: make(states_b, evals_b),
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintSet, ProjectionKind};
    use crate::integrators::GradientMode;
    use crate::potentials::{Potential, StochasticGradient};

    fn circle(lambda: f64) -> PenalizedPotential {
        PenalizedPotential::new(
            Potential::isotropic(2, 1.0).unwrap(),
            ConstraintSet::ball(2, 0.5).unwrap(),
            ProjectionKind::Gauge,
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_returns_initial() {
        let cfg = IntegratorConfig::new(Scheme::Cubu, 0.1, 2.0).unwrap();
        let trace = run_chain(None, 0, &cfg, &circle(0.25), 1).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.states[0].theta, Vector::zeros(2));
    }

    #[test]
    fn same_seed_same_trace() {
        for scheme in Scheme::ALL {
            let cfg = IntegratorConfig::new(scheme, 0.1, 2.0)
                .unwrap()
                .with_gradient(GradientMode::Stochastic(StochasticGradient::batches(64)));
            let a = run_chain(None, 200, &cfg, &circle(0.25), 11).unwrap();
            let b = run_chain(None, 200, &cfg, &circle(0.25), 11).unwrap();
            let c = run_chain(None, 200, &cfg, &circle(0.25), 12).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.states, c.states);
        }
    }

    #[test]
    fn circle_preset_does_not_diverge() {
        for scheme in Scheme::ALL {
            let cfg = IntegratorConfig::new(scheme, 0.1, 2.0).unwrap();
            let trace = run_chain(None, 1000, &cfg, &circle(0.25), 3).unwrap();
            assert_eq!(trace.len(), 1001);
        }
    }

    #[test]
    fn divergence_reports_step() {
        // h far beyond the stability limit of the stiff penalty
        let cfg = IntegratorConfig::new(Scheme::Cklmc, 0.5, 2.0).unwrap();
        let err = run_chain(None, 10_000, &cfg, &circle(0.01), 3).unwrap_err();
        assert!(matches!(err, Error::Diverged { step, .. } if step > 0));
    }

    #[test]
    fn coupled_identical_starts_stay_together() {
        let cfg = IntegratorConfig::new(Scheme::Cubu, 0.1, 2.0).unwrap();
        let s =
            KineticState::new(Vector::from_element(2, 0.3), Vector::from_element(2, -0.1)).unwrap();
        let run = run_coupled(s.clone(), s, 100, &cfg, &circle(0.25), 5).unwrap();
        assert!(run.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn trace_csv_header() {
        let cfg = IntegratorConfig::new(Scheme::Cubu, 0.1, 2.0).unwrap();
        let trace = run_chain(None, 2, &cfg, &circle(0.25), 1).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,theta_1,theta_2,v_1,v_2\n0,0,0,"));
        assert_eq!(text.lines().count(), 4);
    }
}
