//! Empirical convergence orders and contraction rates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{BrownianPath, KineticState, NoiseBlock, NoiseSource, Scheme, Stepper};
use crate::linalg::{fit_line, Matrix, Vector};
use crate::random::rng_stream;

/// Ratio between a rung's step and its reference step in strong-error ladders.
pub const STRONG_REFINEMENT: usize = 16;

/// Least-squares fit of `log error = slope · log h + intercept`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OrderFit {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

pub fn fit_order(steps: &[f64], errors: &[f64]) -> Result<OrderFit> {
    let usable: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (*h, *e))
        .collect();
    if usable.len() < 3 {
        return Err(Error::NotEnoughPoints {
            needed: 3,
            got: usable.len(),
        });
    }
    let lx: Vec<f64> = usable.iter().map(|(h, _)| h.ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|(_, e)| e.ln()).collect();
    let (slope, intercept, residual) = fit_line(&lx, &ly);
    Ok(OrderFit {
        steps: usable.iter().map(|p| p.0).collect(),
        errors: usable.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        residual,
    })
}

fn spectral_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Fixed point of `Σ = MΣMᵀ + SSᵀ`; fails when `M` is not a contraction in spectrum.
pub fn stationary_covariance(m: &Matrix, s: &Matrix) -> Result<Matrix> {
    let d = m.nrows();
    let rho = spectral_radius(m);
    if rho >= 1.0 {
        return Err(Error::Inadmissible(format!(
            "unstable step: spectral radius {rho}"
        )));
    }
    let lhs = Matrix::identity(d * d, d * d) - m.kronecker(m);
    let rhs = s * s.transpose();
    let rhs_vec = Vector::from_column_slice(rhs.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| Error::Inadmissible("singular stationary covariance system".into()))?;
    let sigma = Matrix::from_column_slice(d, d, sol.as_slice());
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// One-step affine kernel `(θ, v) ↦ M(θ, v) + Sξ` of a scheme on `f(θ) = kθ²/2`,
/// read off the implementation by probing basis states and unit noises.
fn probe_kernel(scheme: Scheme, k: f64, gamma: f64, h: f64) -> Result<(Matrix, Matrix)> {
    let r = NoiseBlock::standard_count(scheme);
    let one = |x: f64| Vector::from_element(1, x);
    let run = |state: KineticState, block: NoiseBlock| {
        let mut grad = |x: &Vector| Ok(x * k);
        Stepper::new(scheme, gamma).step(&state, h, &mut grad, &block)
    };
    let mut m = Matrix::zeros(2, 2);
    for (j, (t, v)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let out = run(
            KineticState::new(one(t), one(v))?,
            NoiseBlock::zero(scheme, 1),
        )?;
        m[(0, j)] = out.theta[0];
        m[(1, j)] = out.v[0];
    }
    let mut s = Matrix::zeros(2, r);
    for j in 0..r {
        let xs: Vec<Vector> = (0..r)
            .map(|i| one(if i == j { 1.0 } else { 0.0 }))
            .collect();
        let block = NoiseBlock::from_standard(scheme, h, gamma, &xs);
        let out = run(KineticState::new(one(0.0), one(0.0))?, block)?;
        s[(0, j)] = out.theta[0];
        s[(1, j)] = out.v[0];
    }
    Ok((m, s))
}

fn covariance_error(sigma: &Matrix, k: f64) -> (f64, f64) {
    let target = Matrix::from_diagonal(&Vector::from_row_slice(&[1.0 / k, 1.0]));
    ((sigma - target).amax(), (sigma[(0, 0)] - 1.0 / k).abs())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeakLadder {
    /// Fit of the largest entrywise deviation of the stationary `(θ, v)` covariance.
    pub fit: OrderFit,
    /// Deviation of the stationary position variance alone, per stable rung.
    pub position_errors: Vec<f64>,
    /// Rungs excluded because the step was unstable.
    pub unstable: Vec<f64>,
}

/// Stationary bias of a scheme on the 1-D target `f(θ) = kθ²/2`, computed exactly from
/// the discrete chain's covariance fixed point.
pub fn weak_bias_ladder(scheme: Scheme, k: f64, gamma: f64, ladder: &[f64]) -> Result<WeakLadder> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    let mut position_errors = Vec::new();
    let mut unstable = Vec::new();
    for &h in ladder {
        let (m, s) = probe_kernel(scheme, k, gamma, h)?;
        match stationary_covariance(&m, &s) {
            Ok(sigma) => {
                let (full, pos) = covariance_error(&sigma, k);
                steps.push(h);
                errors.push(full);
                position_errors.push(pos);
            }
            Err(Error::Inadmissible(_)) => unstable.push(h),
            Err(e) => return Err(e),
        }
    }
    Ok(WeakLadder {
        fit: fit_order(&steps, &errors)?,
        position_errors,
        unstable,
    })
}

/// Stationary bias of the exact transition kernel over time `h` (matrix exponential of
/// the drift, noise covariance by Van Loan's block formula). Zero up to rounding.
pub fn exact_kernel_bias(k: f64, gamma: f64, h: f64) -> Result<f64> {
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -k, -gamma]);
    let diffusion = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0 * gamma]);
    let mut block = Matrix::zeros(4, 4);
    block.view_mut((0, 0), (2, 2)).copy_from(&(-&a));
    block.view_mut((0, 2), (2, 2)).copy_from(&diffusion);
    block.view_mut((2, 2), (2, 2)).copy_from(&a.transpose());
    let e = (block * h).exp();
    let m = e.view((2, 2), (2, 2)).transpose();
    let q = &m * e.view((0, 2), (2, 2));
    let q = (&q + q.transpose()) * 0.5;
    let s = q
        .cholesky()
        .ok_or_else(|| Error::Inadmissible("degenerate exact-kernel noise".into()))?
        .l();
    let sigma = stationary_covariance(&m, &s)?;
    Ok(covariance_error(&sigma, k).0)
}

fn steps_for(horizon: f64, h: f64) -> Result<usize> {
    let n = (horizon / h).round();
    if n < 1.0 || (n * h - horizon).abs() > 1e-9 * horizon {
        return Err(Error::param(
            "h",
            format!("horizon {horizon} is not a multiple of {h}"),
        ));
    }
    Ok(n as usize)
}

type GradFn<'a> = &'a (dyn Fn(&Vector) -> Result<Vector> + Sync);

fn run_on_path(
    scheme: Scheme,
    grad: GradFn<'_>,
    gamma: f64,
    h: f64,
    n: usize,
    initial: &KineticState,
    path: &BrownianPath,
) -> Result<KineticState> {
    let mut reader = path.reader();
    let mut stepper = Stepper::new(scheme, gamma);
    let mut g = |x: &Vector| grad(x);
    let mut state = initial.clone();
    for _ in 0..n {
        let block = reader.next_block(scheme, h, gamma, initial.dim())?;
        state = stepper.step(&state, h, &mut g, &block)?;
    }
    Ok(state)
}

/// RMS terminal `(θ, v)` distance between chains at steps `h` and `h_ref` driven by the
/// same Brownian path, over `paths` independent paths.
#[allow(clippy::too_many_arguments)]
pub fn strong_error(
    scheme: Scheme,
    grad: GradFn<'_>,
    gamma: f64,
    h: f64,
    h_ref: f64,
    horizon: f64,
    initial: &KineticState,
    paths: usize,
    seed: u64,
) -> Result<f64> {
    let ladder = strong_errors(
        scheme,
        grad,
        gamma,
        &[h],
        h / h_ref,
        horizon,
        initial,
        paths,
        seed,
    )?;
    Ok(ladder[0])
}

#[allow(clippy::too_many_arguments)]
fn strong_errors(
    scheme: Scheme,
    grad: GradFn<'_>,
    gamma: f64,
    ladder: &[f64],
    refinement: f64,
    horizon: f64,
    initial: &KineticState,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if paths == 0 || ladder.is_empty() {
        return Err(Error::param("paths", "need at least one path and one rung"));
    }
    let h_min = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = h_min / refinement / 2.0;
    let plan: Vec<(f64, usize, f64, usize)> = ladder
        .iter()
        .map(|&h| {
            let h_ref = h / refinement;
            Ok((h, steps_for(horizon, h)?, h_ref, steps_for(horizon, h_ref)?))
        })
        .collect::<Result<_>>()?;
    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_stream(seed, 16 + i as u64);
            let path = BrownianPath::generate(horizon, delta, gamma, initial.dim(), &mut rng)?;
            plan.iter()
                .map(|&(h, n, h_ref, n_ref)| {
                    let coarse = run_on_path(scheme, grad, gamma, h, n, initial, &path)?;
                    let fine = run_on_path(scheme, grad, gamma, h_ref, n_ref, initial, &path)?;
                    Ok(coarse.distance(&fine).powi(2))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..ladder.len())
        .map(|r| (per_path.iter().map(|p| p[r]).sum::<f64>() / paths as f64).sqrt())
        .collect())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StrongLadder {
    pub fit: OrderFit,
    pub horizon: f64,
    pub paths: usize,
    pub refinement: usize,
}

/// Strong error at each rung against a reference chain with step `h/16`.
#[allow(clippy::too_many_arguments)]
pub fn strong_error_ladder(
    scheme: Scheme,
    grad: GradFn<'_>,
    gamma: f64,
    ladder: &[f64],
    horizon: f64,
    initial: &KineticState,
    paths: usize,
    seed: u64,
) -> Result<StrongLadder> {
    let errors = strong_errors(
        scheme,
        grad,
        gamma,
        ladder,
        STRONG_REFINEMENT as f64,
        horizon,
        initial,
        paths,
        seed,
    )?;
    Ok(StrongLadder {
        fit: fit_order(ladder, &errors)?,
        horizon,
        paths,
        refinement: STRONG_REFINEMENT,
    })
}

/// Negated least-squares slope of `log d_n` against `n`, over the positive distances.
pub fn contraction_fit(distances: &[f64]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0 && d.is_finite())
        .map(|(i, d)| (i as f64, d.ln()))
        .unzip();
    if xs.len() < 10 {
        return Err(Error::NotEnoughPoints {
            needed: 10,
            got: xs.len(),
        });
    }
    Ok(-fit_line(&xs, &ys).0)
}
