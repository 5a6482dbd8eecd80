//! Iterative projection solvers for sets without a closed-form projection.
//!
//! All solvers minimise `½(x−θ)ᵀQ(x−θ)` over the set (`Q = I` when absent)
//! and share one iteration budget and one KKT tolerance.

use crate::error::{Error, Result};
use crate::linalg::{sym_eig_range, Matrix, Vector};

pub const MAX_SOLVER_ITERATIONS: usize = 10_000;
pub const SOLVER_TOLERANCE: f64 = 1e-10;

struct Budget {
    used: usize,
}

impl Budget {
    fn tick(&mut self, residual: f64) -> Result<()> {
        self.used += 1;
        if self.used > MAX_SOLVER_ITERATIONS {
            return Err(Error::ProjectionNonConvergence {
                iterations: MAX_SOLVER_ITERATIONS,
                residual,
            });
        }
        Ok(())
    }
}

/// Bisection on the multiplier `μ` of the single constraint `c(x) ≤ 0`, where
/// `solve(μ)` returns the unconstrained minimiser of the Lagrangian and
/// `violation` evaluates the constraint on it. Returns the feasible end.
fn multiplier_bisection(
    budget: &mut Budget,
    mut solve: impl FnMut(f64, &mut Budget) -> Result<Vector>,
    violation: impl Fn(&Vector) -> f64,
) -> Result<(f64, Vector)> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut x_hi = solve(hi, budget)?;
    while violation(&x_hi) > 0.0 {
        budget.tick(violation(&x_hi))?;
        lo = hi;
        hi *= 4.0;
        x_hi = solve(hi, budget)?;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            return Ok((hi, x_hi));
        }
        budget.tick(hi - lo)?;
        let x = solve(mid, budget)?;
        if violation(&x) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x;
        }
    }
}

pub(super) fn project_ellipsoid(theta: &Vector, a: &Matrix, q: &Matrix) -> Result<Vector> {
    let mut budget = Budget { used: 0 };
    let q_theta = q * theta;
    let (mu, x) = multiplier_bisection(
        &mut budget,
        |mu, _| {
            let lhs = q + a * mu;
            lhs.cholesky().map(|c| c.solve(&q_theta)).ok_or_else(|| {
                Error::param(
                    "bregman.q",
                    "metric plus constraint is not positive definite",
                )
            })
        },
        |x| x.dot(&(a * x)) - 1.0,
    )?;
    let scale = 1.0 + q_theta.norm();
    let stationarity = (q * (&x - theta) + (a * &x) * mu).norm() / scale;
    let slack = (x.dot(&(a * &x)) - 1.0).abs();
    check_kkt(stationarity.max(slack), budget.used)?;
    Ok(x)
}

pub(super) fn project_lq_ball(
    theta: &Vector,
    exponent: f64,
    radius: f64,
    q: Option<&Matrix>,
) -> Result<Vector> {
    let p = theta.len();
    let id;
    let q = match q {
        Some(q) => q,
        None => {
            id = Matrix::identity(p, p);
            &id
        }
    };
    let target = radius.powf(exponent);
    let power_sum = |x: &Vector| x.iter().map(|v| v.abs().powf(exponent)).sum::<f64>();
    let objective = |x: &Vector, mu: f64| {
        let d = x - theta;
        0.5 * d.dot(&(q * &d)) + mu / exponent * power_sum(x)
    };
    let gradient = |x: &Vector, mu: f64| {
        q * (x - theta) + x.map(|v| mu * v.signum() * v.abs().powf(exponent - 1.0))
    };
    let scale = 1.0 + (q * theta).norm();
    let mut warm = theta.clone();
    let mut budget = Budget { used: 0 };

    let (mu, x) = multiplier_bisection(
        &mut budget,
        |mu, budget| {
            // damped Newton on the strictly convex Lagrangian
            let mut x = warm.clone();
            for _ in 0..200 {
                let g = gradient(&x, mu);
                let gnorm = g.norm();
                if gnorm <= 1e-14 * scale {
                    break;
                }
                budget.tick(gnorm / scale)?;
                let mut h = q.clone();
                for i in 0..p {
                    h[(i, i)] += mu * (exponent - 1.0) * x[i].abs().powf(exponent - 2.0);
                }
                let Some(chol) = h.cholesky() else { break };
                let dx = chol.solve(&g);
                let f0 = objective(&x, mu);
                let slope = g.dot(&dx);
                let mut t = 1.0;
                let mut next = &x - &dx * t;
                // near the optimum objective differences drown in rounding; fall back on the gradient
                while objective(&next, mu) > f0 - 1e-4 * t * slope + 1e-15 * f0.abs()
                    && gradient(&next, mu).norm() >= gnorm
                    && t > 1e-12
                {
                    t *= 0.5;
                    next = &x - &dx * t;
                }
                let moved = (&next - &x).norm();
                x = next;
                if moved <= 1e-16 * (1.0 + x.norm()) {
                    break;
                }
            }
            warm = x.clone();
            Ok(x)
        },
        |x| power_sum(x) - target,
    )?;
    let stationarity = gradient(&x, mu).norm() / scale;
    let slack = (power_sum(&x) - target).abs() / target;
    check_kkt(stationarity.max(slack), budget.used)?;
    Ok(x)
}

fn check_kkt(residual: f64, iterations: usize) -> Result<()> {
    if residual.is_finite() && residual <= SOLVER_TOLERANCE {
        Ok(())
    } else {
        Err(Error::ProjectionNonConvergence {
            iterations,
            residual,
        })
    }
}

/// Accelerated projected gradient on the non-negative dual, followed by an
/// active-set KKT solve once the support has settled.
pub(super) fn project_polytope(
    theta: &Vector,
    a: &Matrix,
    b: &Vector,
    q: Option<&Matrix>,
) -> Result<Vector> {
    let (m, p) = a.shape();
    let q_inv = match q {
        Some(q) => q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::param("bregman.q", "not positive definite"))?
            .inverse(),
        None => Matrix::identity(p, p),
    };
    let qa = &q_inv * a.transpose(); // p × m
    let k = a * &qa; // m × m dual Hessian
    let c = a * theta - b;
    let scale = 1.0 + theta.norm() + b.amax();
    let row_norms: Vec<f64> = (0..m).map(|i| a.row(i).norm()).collect();
    let primal = |mu: &Vector| theta - &qa * mu;

    let kkt_residual = |mu: &Vector, x: &Vector| {
        let slack = a * x - b;
        let mut r: f64 = 0.0;
        for i in 0..m {
            r = r.max(slack[i].max(0.0) / row_norms[i]);
            r = r.max((mu[i] * slack[i]).abs() / scale);
        }
        r
    };

    let try_active_set = |support: &[usize]| -> Option<Vector> {
        if support.is_empty() {
            return None;
        }
        let k_ss = k.select_rows(support).select_columns(support);
        let c_s = Vector::from_iterator(support.len(), support.iter().map(|&i| c[i]));
        let mu_s = k_ss.svd(true, true).solve(&c_s, 1e-13 * k.amax()).ok()?;
        if mu_s.iter().any(|&v| v.is_nan() || v < -1e-12 * scale) {
            return None;
        }
        let mut mu = Vector::zeros(m);
        for (j, &i) in support.iter().enumerate() {
            mu[i] = mu_s[j].max(0.0);
        }
        let x = primal(&mu);
        (kkt_residual(&mu, &x) <= SOLVER_TOLERANCE).then_some(x)
    };

    let (_, lmax) = sym_eig_range(&k);
    let step = 1.0 / lmax;
    let mut mu = Vector::zeros(m);
    let mut y = mu.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    for iter in 0..MAX_SOLVER_ITERATIONS {
        let grad = &k * &y - &c;
        let next = (&y - grad * step).map(|v| v.max(0.0));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        // gradient-based restart keeps the iteration monotone enough
        if (&y - &next).dot(&(&next - &mu)) > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            y = &next + (&next - &mu) * momentum;
            t = t_next;
        }
        mu = next;

        if iter < 8 || iter % 10 == 0 {
            let x = primal(&mu);
            residual = kkt_residual(&mu, &x);
            if residual <= SOLVER_TOLERANCE {
                return Ok(x);
            }
            let support: Vec<usize> = (0..m).filter(|&i| mu[i] > 0.0).collect();
            if let Some(x) = try_active_set(&support) {
                return Ok(x);
            }
            let slack = a * &x - b;
            let widened: Vec<usize> = (0..m)
                .filter(|&i| mu[i] > 0.0 || slack[i] >= -1e-9 * scale)
                .collect();
            if widened != support {
                if let Some(x) = try_active_set(&widened) {
                    return Ok(x);
                }
            }
        }
    }
    Err(Error::ProjectionNonConvergence {
        iterations: MAX_SOLVER_ITERATIONS,
        residual,
    })
}
