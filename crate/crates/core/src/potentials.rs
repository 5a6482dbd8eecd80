//! Target potentials, the penalised surrogate `U^λ = f + d_K/(2λ²)` and
//! stochastic gradient estimators.

use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::constraints::{ConstraintSet, PenaltyParams, ProjectionKind, SetShape};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_spd, sym_eig_range, Matrix, Vector};
use crate::random::standard_normal;

/// Linear-regression data `y_j = θ⋆ᵀa_j + η_j`, one feature row per datum.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    features: Matrix,
    responses: Vector,
}

impl RegressionData {
    pub fn new(features: Matrix, responses: Vector) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.nrows() != responses.len() {
            return Err(Error::param(
                "responses",
                format!(
                    "{} feature rows but {} responses",
                    features.nrows(),
                    responses.len()
                ),
            ));
        }
        if features
            .iter()
            .chain(responses.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::param("data", "non-finite entry"));
        }
        Ok(Self {
            features,
            responses,
        })
    }

    /// Standard-normal features and Gaussian response noise of variance `noise_var`.
    pub fn generate(
        n: usize,
        theta_star: &Vector,
        noise_var: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::param("noise_var", "must be finite and nonnegative"));
        }
        let p = theta_star.len();
        let mut features = Matrix::zeros(n, p);
        let mut responses = Vector::zeros(n);
        let sd = noise_var.sqrt();
        for j in 0..n {
            let a = standard_normal(rng, p);
            let eta: f64 = standard_normal(rng, 1)[0];
            responses[j] = a.dot(theta_star) + sd * eta;
            features.set_row(j, &a.transpose());
        }
        Self::new(features, responses)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn responses(&self) -> &Vector {
        &self.responses
    }

    /// Unconstrained least-squares fit.
    pub fn least_squares(&self) -> Result<Vector> {
        let gram = self.features.transpose() * &self.features;
        let rhs = self.features.transpose() * &self.responses;
        gram.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::param("features", "design matrix is rank deficient"))
    }

    /// Gradient of `½(y_j − a_jᵀθ)²`.
    fn loss_grad(&self, j: usize, theta: &Vector) -> Vector {
        let a = self.features.row(j);
        let resid = self.responses[j] - (a * theta)[0];
        a.transpose() * (-resid)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("a_{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut row: Vec<String> = self
                .features
                .row(j)
                .iter()
                .map(|x| format!("{x:e}"))
                .collect();
            row.push(format!("{:e}", self.responses[j]));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let width = r.headers()?.len();
        if width < 2 {
            return Err(Error::param(
                "csv",
                "need at least one feature column and y",
            ));
        }
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::param("csv", e.to_string()))?;
            if vals.len() != width {
                return Err(Error::param("csv", "ragged row"));
            }
            ys.push(vals[width - 1]);
            rows.extend_from_slice(&vals[..width - 1]);
        }
        let n = ys.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Self::new(
            Matrix::from_row_slice(n, width - 1, &rows),
            Vector::from_vec(ys),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `½θᵀPθ` with precision `P`.
    Quadratic { precision: Matrix },
    /// `Σ_j ½(y_j − a_jᵀθ)²`; the Gram matrix and `Aᵀy` are cached for full gradients.
    SumOfLosses {
        data: RegressionData,
        gram: Matrix,
        ay: Vector,
        yy: f64,
    },
}

/// A strongly convex, smooth potential `f` together with its constants `(m, L, L1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: Kind,
    m: f64,
    l: f64,
}

impl Potential {
    pub fn quadratic(precision: Matrix) -> Result<Self> {
        check_spd(&precision, "precision")?;
        let (m, l) = sym_eig_range(&precision);
        Ok(Self {
            kind: Kind::Quadratic { precision },
            m,
            l,
        })
    }

    /// `½‖θ‖²` in dimension `dim`, scaled by `k`.
    pub fn isotropic(dim: usize, k: f64) -> Result<Self> {
        if dim == 0 || !(k > 0.0 && k.is_finite()) {
            return Err(Error::param("precision", "need dim ≥ 1 and k > 0"));
        }
        Self::quadratic(Matrix::identity(dim, dim) * k)
    }

    pub fn sum_of_losses(data: RegressionData) -> Result<Self> {
        let gram = data.features.transpose() * &data.features;
        let (m, l) = sym_eig_range(&gram);
        if m <= 0.0 {
            return Err(Error::param("features", "design matrix is rank deficient"));
        }
        let ay = data.features.transpose() * &data.responses;
        let yy = data.responses.norm_squared();
        Ok(Self {
            kind: Kind::SumOfLosses { data, gram, ay, yy },
            m,
            l,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Quadratic { precision } => precision.nrows(),
            Kind::SumOfLosses { data, .. } => data.dim(),
        }
    }

    /// Strong convexity constant `m`.
    pub fn strong_convexity(&self) -> f64 {
        self.m
    }

    /// Gradient Lipschitz constant `L`.
    pub fn smoothness(&self) -> f64 {
        self.l
    }

    /// Hessian Lipschitz constant `L1`; both variants have constant Hessians.
    pub fn hessian_lipschitz(&self) -> f64 {
        0.0
    }

    pub fn precision(&self) -> Option<&Matrix> {
        match &self.kind {
            Kind::Quadratic { precision } => Some(precision),
            _ => None,
        }
    }

    pub fn data(&self) -> Option<&RegressionData> {
        match &self.kind {
            Kind::SumOfLosses { data, .. } => Some(data),
            _ => None,
        }
    }

    pub fn eval(&self, theta: &Vector) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(match &self.kind {
            Kind::Quadratic { precision } => 0.5 * theta.dot(&(precision * theta)),
            Kind::SumOfLosses { gram, ay, yy, .. } => {
                0.5 * theta.dot(&(gram * theta)) - theta.dot(ay) + 0.5 * yy
            }
        })
    }

    pub fn grad(&self, theta: &Vector) -> Result<Vector> {
        check_dim(self.dim(), theta.len())?;
        Ok(match &self.kind {
            Kind::Quadratic { precision } => precision * theta,
            Kind::SumOfLosses { gram, ay, .. } => gram * theta - ay,
        })
    }
}

/// The surrogate `U^λ = f + d_K/(2λ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedPotential {
    base: Potential,
    set: ConstraintSet,
    kind: ProjectionKind,
    params: PenaltyParams,
}

impl PenalizedPotential {
    pub fn new(
        base: Potential,
        set: ConstraintSet,
        kind: ProjectionKind,
        lambda: f64,
    ) -> Result<Self> {
        check_dim(base.dim(), set.dim())?;
        let params = PenaltyParams::new(lambda, &set, &kind)?;
        Ok(Self {
            base,
            set,
            kind,
            params,
        })
    }

    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn kind(&self) -> &ProjectionKind {
        &self.kind
    }

    pub fn params(&self) -> &PenaltyParams {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eval(&self, theta: &Vector) -> Result<f64> {
        Ok(self.base.eval(theta)? + self.set.penalty(&self.kind, self.params.lambda, theta)?)
    }

    pub fn grad(&self, theta: &Vector) -> Result<Vector> {
        Ok(self.base.grad(theta)? + self.penalty_grad(theta)?)
    }

    pub fn penalty_grad(&self, theta: &Vector) -> Result<Vector> {
        self.set.penalty_grad(&self.kind, &self.params, theta)
    }

    /// Smoothness constant of the penalty part, `C_proj`.
    pub fn projection_constant(&self) -> f64 {
        match &self.kind {
            ProjectionKind::Bregman(q) => sym_eig_range(q).1,
            _ => 1.0,
        }
    }

    /// `M^λ = L + C_proj/λ²`.
    pub fn smoothness(&self) -> f64 {
        let l2 = self.params.lambda * self.params.lambda;
        self.base.smoothness() + self.projection_constant() / l2
    }

    /// Hessian-Lipschitz constant `M₁^λ` for ellipsoids (balls included) and `l_q` balls
    /// under Euclidean or Gauge projection.
    pub fn hessian_lipschitz(&self) -> Result<f64> {
        if matches!(self.kind, ProjectionKind::Bregman(_)) {
            return Err(Error::ConstantUnavailable(
                "Hessian-Lipschitz constant of a Bregman penalty".into(),
            ));
        }
        let l2 = self.params.lambda * self.params.lambda;
        let l1 = self.base.hessian_lipschitz();
        match self.set.shape() {
            SetShape::Ball { .. } => Ok(l1 + 4.0 / l2),
            SetShape::Ellipsoid { a } => {
                let (lmin, lmax) = sym_eig_range(a);
                Ok(l1 + 4.0 / l2 * (lmax / lmin).powi(3))
            }
            SetShape::LqBall { q, radius } => {
                let p = self.dim() as f64;
                Ok(l1 + 8.0 / l2 * p.powf(1.5) * (q - 1.0).powi(2) / radius)
            }
            SetShape::Box { .. } | SetShape::Polytope { .. } => Err(Error::ConstantUnavailable(
                "Hessian-Lipschitz constant of a polyhedral penalty".into(),
            )),
        }
    }

    /// `(M^λ, M₁^λ)`.
    pub fn penalized_constants(&self) -> Result<(f64, f64)> {
        Ok((self.smoothness(), self.hessian_lipschitz()?))
    }
}

/// Unbiased randomised estimators of `∇f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StochasticGradient {
    /// `(n/b) Σ_{j∈Ω} ∇f_j` over a random batch `Ω` of size `b`.
    Minibatch {
        batch_size: usize,
        with_replacement: bool,
    },
    /// `∇f + σ₁ L ‖θ‖ ξ / √p`, whose error variance is exactly `σ₁²L²‖θ‖²`.
    AdditiveNoise { sigma1: f64 },
}

impl StochasticGradient {
    /// Additive noise matching the variance of a 1-in-`batches` minibatch, `σ₁² = 1/batches`.
    pub fn batches(batches: usize) -> Self {
        StochasticGradient::AdditiveNoise {
            sigma1: (1.0 / batches as f64).sqrt(),
        }
    }

    /// Noise levels `(σ₁, σ₂)`. Minibatch levels are the nominal `1/√b` orders.
    pub fn noise_levels(&self, pot: &Potential) -> (f64, f64) {
        match *self {
            StochasticGradient::Minibatch { batch_size, .. } => {
                let s = (1.0 / batch_size as f64).sqrt();
                (s, s)
            }
            StochasticGradient::AdditiveNoise { sigma1 } => (sigma1, sigma1 * pot.smoothness()),
        }
    }

    pub fn validate(&self, pot: &Potential) -> Result<()> {
        match *self {
            StochasticGradient::Minibatch {
                batch_size,
                with_replacement,
            } => {
                let data = pot.data().ok_or_else(|| {
                    Error::Unsupported("minibatch gradients need a sum-of-losses potential".into())
                })?;
                if batch_size == 0 || (!with_replacement && batch_size > data.len()) {
                    return Err(Error::param(
                        "batch_size",
                        format!("must lie in 1..={}, got {batch_size}", data.len()),
                    ));
                }
                Ok(())
            }
            StochasticGradient::AdditiveNoise { sigma1 } => {
                if sigma1 >= 0.0 && sigma1.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("sigma1", "must be finite and nonnegative"))
                }
            }
        }
    }

    pub fn estimate(&self, pot: &Potential, theta: &Vector, rng: &mut impl Rng) -> Result<Vector> {
        check_dim(pot.dim(), theta.len())?;
        self.validate(pot)?;
        match *self {
            StochasticGradient::Minibatch {
                batch_size,
                with_replacement,
            } => {
                let data = pot.data().expect("validated");
                let n = data.len();
                let mut g = Vector::zeros(theta.len());
                if with_replacement {
                    for _ in 0..batch_size {
                        g += data.loss_grad(rng.random_range(0..n), theta);
                    }
                } else if batch_size == n {
                    return pot.grad(theta);
                } else {
                    for j in index::sample(rng, n, batch_size) {
                        g += data.loss_grad(j, theta);
                    }
                }
                Ok(g * (n as f64 / batch_size as f64))
            }
            StochasticGradient::AdditiveNoise { sigma1 } => {
                let p = theta.len();
                let scale = sigma1 * pot.smoothness() * theta.norm() / (p as f64).sqrt();
                Ok(pot.grad(theta)? + standard_normal(rng, p) * scale)
            }
        }
    }
}
