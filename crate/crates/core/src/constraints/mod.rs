//! Convex compact constraint sets, their projections and the quadratic
//! distance penalty built on top of them.
//!
//! Every set contains the origin in its interior, which makes the
//! Minkowski gauge well defined and gives the inner/outer radii
//! `B(r) ⊂ K ⊂ B(R)` used throughout the bounds calculators.

mod solvers;

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{check_spd, for_each_combination, sym_eig_range, Matrix, Vector};

pub use solvers::{MAX_SOLVER_ITERATIONS, SOLVER_TOLERANCE};

/// Geometry of a constraint set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetShape {
    /// `{θ : ‖θ‖₂ ≤ radius}`.
    Ball { radius: f64 },
    /// `{θ : θᵀAθ ≤ 1}`.
    Ellipsoid { a: Matrix },
    /// `{θ : ‖θ‖_q ≤ radius}` with `q > 2`.
    LqBall { q: f64, radius: f64 },
    /// `{θ : lower ≤ θ ≤ upper}`; facets are ordered coordinate-major, upper before lower.
    Box { lower: Vector, upper: Vector },
    /// `{θ : a_iᵀθ ≤ b_i}`, rows of `a` are the facet normals.
    Polytope { a: Matrix, b: Vector },
}

/// A validated convex body with the origin strictly inside.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    shape: SetShape,
    dim: usize,
    inner_radius: f64,
    outer_radius: f64,
    /// Vertices, for boxes and polytopes.
    vertices: Vec<Vector>,
}

/// Which projection drives the distance penalty.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionKind {
    Euclidean,
    /// Projection in the metric `(θ−θ')ᵀQ(θ−θ')`.
    Bregman(Matrix),
    /// Radial scaling `θ / g_K(θ)`.
    Gauge,
}

impl ProjectionKind {
    pub fn bregman(q: Matrix) -> Result<Self> {
        check_spd(&q, "bregman.q")?;
        Ok(ProjectionKind::Bregman(q))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProjectionKind::Euclidean => "euclidean",
            ProjectionKind::Bregman(_) => "bregman",
            ProjectionKind::Gauge => "gauge",
        }
    }
}

/// Penalty scale and the distance-equivalence constants of the set/projection pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PenaltyParams {
    /// Builds the parameters and derives `(c1, c2)` such that
    /// `c1·dist²(θ, K) ≤ d_K(θ) ≤ c2·dist²(θ, K)` with `dist` the Euclidean distance.
    pub fn new(lambda: f64, set: &ConstraintSet, kind: &ProjectionKind) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(
                "lambda",
                format!("must be positive, got {lambda}"),
            ));
        }
        let (c1, c2) = match kind {
            ProjectionKind::Euclidean => (1.0, 1.0),
            ProjectionKind::Bregman(q) => {
                check_dim(set.dim(), q.nrows())?;
                sym_eig_range(q)
            }
            ProjectionKind::Gauge => {
                let (r, big_r) = set.radii();
                (1.0, (big_r / r).powi(2))
            }
        };
        Ok(Self { lambda, c1, c2 })
    }
}

impl ConstraintSet {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        check_positive_dim(dim)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            shape: SetShape::Ball { radius },
            dim,
            inner_radius: radius,
            outer_radius: radius,
            vertices: Vec::new(),
        })
    }

    pub fn ellipsoid(a: Matrix) -> Result<Self> {
        check_spd(&a, "ellipsoid.a").map_err(|e| Error::InvalidSet(e.to_string()))?;
        let (lmin, lmax) = sym_eig_range(&a);
        Ok(Self {
            dim: a.nrows(),
            inner_radius: 1.0 / lmax.sqrt(),
            outer_radius: 1.0 / lmin.sqrt(),
            shape: SetShape::Ellipsoid { a },
            vertices: Vec::new(),
        })
    }

    pub fn lq_ball(dim: usize, q: f64, radius: f64) -> Result<Self> {
        check_positive_dim(dim)?;
        if !(q > 2.0 && q.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "l_q ball needs finite q > 2, got {q}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "l_q radius must be positive, got {radius}"
            )));
        }
        let outer = radius * (dim as f64).powf(0.5 - 1.0 / q);
        Ok(Self {
            shape: SetShape::LqBall { q, radius },
            dim,
            inner_radius: radius,
            outer_radius: outer,
            vertices: Vec::new(),
        })
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        let dim = lower.len();
        check_positive_dim(dim)?;
        if upper.len() != dim {
            return Err(Error::InvalidSet(
                "box bounds have different lengths".into(),
            ));
        }
        for i in 0..dim {
            let (l, u) = (lower[i], upper[i]);
            if !(l.is_finite() && u.is_finite() && l < 0.0 && u > 0.0) {
                return Err(Error::InvalidSet(format!(
                    "box must satisfy lower < 0 < upper in every coordinate (coordinate {i}: [{l}, {u}])"
                )));
            }
        }
        let inner = (0..dim)
            .map(|i| (-lower[i]).min(upper[i]))
            .fold(f64::INFINITY, f64::min);
        let outer = (0..dim)
            .map(|i| lower[i].powi(2).max(upper[i].powi(2)))
            .sum::<f64>()
            .sqrt();
        let (a, b) = box_halfspaces(&lower, &upper);
        let vertices = enumerate_vertices(&a, &b)?;
        Ok(Self {
            shape: SetShape::Box { lower, upper },
            dim,
            inner_radius: inner,
            outer_radius: outer,
            vertices,
        })
    }

    /// Polytope `{θ : Aθ ≤ b}`; rejects sets that are unbounded or do not contain
    /// the origin strictly inside.
    pub fn polytope(a: Matrix, b: Vector) -> Result<Self> {
        let dim = a.ncols();
        check_positive_dim(dim)?;
        if a.nrows() != b.len() || a.nrows() == 0 {
            return Err(Error::InvalidSet(
                "polytope needs one offset per facet row".into(),
            ));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSet("polytope has non-finite entries".into()));
        }
        for i in 0..b.len() {
            if b[i] <= 0.0 {
                return Err(Error::InvalidSet(format!(
                    "offset b[{i}] = {} must be positive so the origin is interior",
                    b[i]
                )));
            }
            if a.row(i).norm() == 0.0 {
                return Err(Error::InvalidSet(format!("facet row {i} is zero")));
            }
        }
        if !polytope_is_bounded(&a) {
            return Err(Error::InvalidSet("polytope is unbounded".into()));
        }
        let inner = (0..b.len())
            .map(|i| b[i] / a.row(i).norm())
            .fold(f64::INFINITY, f64::min);
        let vertices = enumerate_vertices(&a, &b)?;
        let outer = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            shape: SetShape::Polytope { a, b },
            dim,
            inner_radius: inner,
            outer_radius: outer,
            vertices,
        })
    }

    pub fn shape(&self) -> &SetShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(r, R)` with `B(r) ⊂ K ⊂ B(R)`.
    pub fn radii(&self) -> (f64, f64) {
        (self.inner_radius, self.outer_radius)
    }

    /// Vertices of boxes and polytopes (empty for smooth sets).
    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    /// Halfspace description `(A, b)` for boxes and polytopes.
    pub fn halfspaces(&self) -> Option<(Matrix, Vector)> {
        match &self.shape {
            SetShape::Box { lower, upper } => Some(box_halfspaces(lower, upper)),
            SetShape::Polytope { a, b } => Some((a.clone(), b.clone())),
            _ => None,
        }
    }

    /// Exact membership test on the set's defining inequalities.
    pub fn contains(&self, theta: &Vector) -> Result<bool> {
        check_dim(self.dim, theta.len())?;
        Ok(self.contains_unchecked(theta))
    }

    pub(crate) fn contains_unchecked(&self, theta: &Vector) -> bool {
        match &self.shape {
            SetShape::Ball { radius } => theta.norm_squared() <= radius * radius,
            SetShape::Ellipsoid { a } => theta.dot(&(a * theta)) <= 1.0,
            SetShape::LqBall { q, radius } => lq_power_sum(theta, *q) <= radius.powf(*q),
            SetShape::Box { lower, upper } => {
                (0..self.dim).all(|i| lower[i] <= theta[i] && theta[i] <= upper[i])
            }
            SetShape::Polytope { a, b } => {
                (0..b.len()).all(|i| a.row(i).dot(&theta.transpose()) <= b[i])
            }
        }
    }

    /// Minkowski functional `inf {t ≥ 0 : θ ∈ tK}` (not clamped at 1).
    pub fn minkowski(&self, theta: &Vector) -> f64 {
        self.minkowski_with_facet(theta).0
    }

    /// Minkowski functional together with the lowest-index facet attaining it
    /// (always `None` for smooth sets).
    fn minkowski_with_facet(&self, theta: &Vector) -> (f64, Option<usize>) {
        match &self.shape {
            SetShape::Ball { radius } => (theta.norm() / radius, None),
            SetShape::Ellipsoid { a } => (theta.dot(&(a * theta)).max(0.0).sqrt(), None),
            SetShape::LqBall { q, radius } => {
                (lq_power_sum(theta, *q).powf(1.0 / q) / radius, None)
            }
            SetShape::Box { lower, upper } => {
                let mut best = (0.0, None);
                for i in 0..self.dim {
                    for (k, bound) in [(2 * i, upper[i]), (2 * i + 1, lower[i])] {
                        let val = theta[i] / bound;
                        if val > best.0 {
                            best = (val, Some(k));
                        }
                    }
                }
                best
            }
            SetShape::Polytope { a, b } => {
                let mut best = (0.0, None);
                for i in 0..b.len() {
                    let val = a.row(i).dot(&theta.transpose()) / b[i];
                    if val > best.0 {
                        best = (val, Some(i));
                    }
                }
                best
            }
        }
    }

    /// Gradient of the Minkowski functional at `θ ≠ 0`; on polytope edges the
    /// subgradient of the lowest-index active facet is returned.
    pub fn minkowski_grad(&self, theta: &Vector) -> Vector {
        let (value, facet) = self.minkowski_with_facet(theta);
        match &self.shape {
            SetShape::Ball { radius } => theta / (radius * theta.norm()),
            SetShape::Ellipsoid { a } => (a * theta) / value,
            SetShape::LqBall { q, radius } => {
                let norm = value * radius;
                theta.map(|x| x.signum() * (x.abs() / norm).powf(q - 1.0) / radius)
            }
            SetShape::Box { lower, upper } => {
                let mut g = Vector::zeros(self.dim);
                if let Some(k) = facet {
                    let i = k / 2;
                    g[i] = 1.0 / if k % 2 == 0 { upper[i] } else { lower[i] };
                }
                g
            }
            SetShape::Polytope { a, b } => match facet {
                Some(i) => a.row(i).transpose() / b[i],
                None => Vector::zeros(self.dim),
            },
        }
    }

    /// Gauge `g_K(θ) = inf {t ≥ 1 : θ ∈ tK}`; exactly 1 on the set.
    pub fn gauge(&self, theta: &Vector) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        Ok(self.gauge_unchecked(theta))
    }

    fn gauge_unchecked(&self, theta: &Vector) -> f64 {
        if self.contains_unchecked(theta) {
            1.0
        } else {
            self.minkowski(theta).max(1.0)
        }
    }

    pub fn project(&self, kind: &ProjectionKind, theta: &Vector) -> Result<Vector> {
        check_dim(self.dim, theta.len())?;
        if self.contains_unchecked(theta) {
            return Ok(theta.clone());
        }
        match kind {
            ProjectionKind::Euclidean => self.project_metric(theta, None),
            ProjectionKind::Bregman(q) => {
                check_dim(self.dim, q.nrows())?;
                self.project_metric(theta, Some(q))
            }
            ProjectionKind::Gauge => Ok(theta / self.gauge_unchecked(theta)),
        }
    }

    /// Projection in the metric given by `q` (identity when `None`) for a point outside the set.
    fn project_metric(&self, theta: &Vector, q: Option<&Matrix>) -> Result<Vector> {
        match (&self.shape, q) {
            (SetShape::Ball { radius }, None) => Ok(theta * (radius / theta.norm())),
            (SetShape::Box { lower, upper }, None) => Ok(Vector::from_fn(self.dim, |i, _| {
                theta[i].clamp(lower[i], upper[i])
            })),
            (SetShape::Ball { radius }, Some(q)) => {
                let a = Matrix::identity(self.dim, self.dim) / (radius * radius);
                solvers::project_ellipsoid(theta, &a, q)
            }
            (SetShape::Ellipsoid { a }, q) => {
                let id;
                let q = match q {
                    Some(q) => q,
                    None => {
                        id = Matrix::identity(self.dim, self.dim);
                        &id
                    }
                };
                solvers::project_ellipsoid(theta, a, q)
            }
            (
                SetShape::LqBall {
                    q: exponent,
                    radius,
                },
                q,
            ) => solvers::project_lq_ball(theta, *exponent, *radius, q),
            (SetShape::Box { .. }, Some(_)) | (SetShape::Polytope { .. }, _) => {
                let (a, b) = self.halfspaces().expect("polyhedral set");
                solvers::project_polytope(theta, &a, &b, q)
            }
        }
    }

    /// Squared distance `d_K(θ)` matching the projection kind: Euclidean residual,
    /// Q-weighted residual, or the radial residual `‖θ − θ/g_K(θ)‖²`.
    pub fn distance_sq(&self, kind: &ProjectionKind, theta: &Vector) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        if self.contains_unchecked(theta) {
            return Ok(0.0);
        }
        let residual = theta - self.project(kind, theta)?;
        Ok(match kind {
            ProjectionKind::Bregman(q) => residual.dot(&(q * &residual)),
            _ => residual.norm_squared(),
        })
    }

    /// Penalty value `d_K(θ) / (2λ²)`.
    pub fn penalty(&self, kind: &ProjectionKind, lambda: f64, theta: &Vector) -> Result<f64> {
        Ok(self.distance_sq(kind, theta)? / (2.0 * lambda * lambda))
    }

    /// Gradient of `d_K(θ) / (2λ²)`.
    pub fn penalty_grad(
        &self,
        kind: &ProjectionKind,
        params: &PenaltyParams,
        theta: &Vector,
    ) -> Result<Vector> {
        check_dim(self.dim, theta.len())?;
        if self.contains_unchecked(theta) {
            return Ok(Vector::zeros(self.dim));
        }
        let inv_l2 = 1.0 / (params.lambda * params.lambda);
        match kind {
            ProjectionKind::Euclidean => Ok((theta - self.project(kind, theta)?) * inv_l2),
            ProjectionKind::Bregman(q) => {
                let residual = theta - self.project(kind, theta)?;
                Ok((q * residual) * inv_l2)
            }
            ProjectionKind::Gauge => {
                let g = self.minkowski(theta);
                if g <= 1.0 {
                    // rounding put θ on the boundary; the penalty is flat there
                    return Ok(Vector::zeros(self.dim));
                }
                let shrink = 1.0 - 1.0 / g;
                let dg = self.minkowski_grad(theta);
                let grad_d = theta * (2.0 * shrink * shrink)
                    + dg * (2.0 * theta.norm_squared() * shrink / (g * g));
                Ok(grad_d * (0.5 * inv_l2))
            }
        }
    }

    /// Lebesgue volume: closed form for balls, ellipsoids, l_q balls, boxes and planar
    /// polytopes; a grid count with step `r/100` for polytopes in three dimensions.
    pub fn volume(&self) -> Result<f64> {
        let p = self.dim as f64;
        let unit_ball = PI.powf(p / 2.0) / gamma(p / 2.0 + 1.0);
        match &self.shape {
            SetShape::Ball { radius } => Ok(unit_ball * radius.powf(p)),
            SetShape::Ellipsoid { a } => Ok(unit_ball / a.determinant().sqrt()),
            SetShape::LqBall { q, radius } => {
                Ok((2.0 * gamma(1.0 + 1.0 / q)).powf(p) / gamma(1.0 + p / q) * radius.powf(p))
            }
            SetShape::Box { lower, upper } => Ok((upper - lower).product()),
            SetShape::Polytope { .. } if self.dim == 2 => {
                let poly = self.boundary_polygon(0)?;
                let n = poly.len();
                let twice_area: f64 = (0..n)
                    .map(|i| {
                        let (x0, y0) = poly[i];
                        let (x1, y1) = poly[(i + 1) % n];
                        x0 * y1 - x1 * y0
                    })
                    .sum();
                Ok(twice_area.abs() / 2.0)
            }
            SetShape::Polytope { .. } if self.dim <= 3 => {
                let step = self.inner_radius / 100.0;
                Ok(self.grid_count(step) as f64 * step.powf(p))
            }
            SetShape::Polytope { .. } => Err(Error::Unsupported(format!(
                "polytope volume in dimension {}",
                self.dim
            ))),
        }
    }

    /// Cell centres of the grid with spacing `step` covering `[-R, R]^p`.
    pub(crate) fn grid_points(&self, step: f64) -> Vec<Vector> {
        let per_axis = (2.0 * self.outer_radius / step).ceil() as usize;
        let total = per_axis.pow(self.dim as u32);
        let mut out = Vec::new();
        for idx in 0..total {
            let mut rem = idx;
            let point = Vector::from_fn(self.dim, |_, _| {
                let k = rem % per_axis;
                rem /= per_axis;
                -self.outer_radius + (k as f64 + 0.5) * step
            });
            out.push(point);
        }
        out
    }

    fn grid_count(&self, step: f64) -> usize {
        self.grid_points(step)
            .iter()
            .filter(|x| self.contains_unchecked(x))
            .count()
    }

    /// Closed boundary curve of a planar set. Polyhedral sets return their vertices in
    /// counter-clockwise order; smooth sets return `samples` points on the boundary.
    pub fn boundary_polygon(&self, samples: usize) -> Result<Vec<(f64, f64)>> {
        if self.dim != 2 {
            return Err(Error::Unsupported(format!(
                "boundary curve needs a planar set, got dimension {}",
                self.dim
            )));
        }
        if !self.vertices.is_empty() {
            let mut pts: Vec<(f64, f64)> = self.vertices.iter().map(|v| (v[0], v[1])).collect();
            pts.sort_by(|a, b| a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)));
            return Ok(pts);
        }
        Ok((0..samples)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / samples as f64;
                let dir = Vector::from_vec(vec![angle.cos(), angle.sin()]);
                let t = self.minkowski(&dir);
                (dir[0] / t, dir[1] / t)
            })
            .collect())
    }
}

fn check_positive_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidSet("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

fn lq_power_sum(theta: &Vector, q: f64) -> f64 {
    theta.iter().map(|x| x.abs().powf(q)).sum()
}

fn box_halfspaces(lower: &Vector, upper: &Vector) -> (Matrix, Vector) {
    let p = lower.len();
    let mut a = Matrix::zeros(2 * p, p);
    let mut b = Vector::zeros(2 * p);
    for i in 0..p {
        a[(2 * i, i)] = 1.0;
        b[2 * i] = upper[i];
        a[(2 * i + 1, i)] = -1.0;
        b[2 * i + 1] = -lower[i];
    }
    (a, b)
}

/// Null direction of `p-1` rows in `R^p` via signed cofactors.
fn cofactor_normal(rows: &Matrix) -> Vector {
    let p = rows.ncols();
    Vector::from_fn(p, |j, _| {
        let minor = rows.clone().remove_column(j);
        let det = if minor.nrows() == 0 {
            1.0
        } else {
            minor.determinant()
        };
        if j % 2 == 0 {
            det
        } else {
            -det
        }
    })
}

/// `{Aθ ≤ b}` with `b > 0` is bounded iff the recession cone `{d : Ad ≤ 0}` is `{0}`.
fn polytope_is_bounded(a: &Matrix) -> bool {
    let (m, p) = a.shape();
    if a.clone().svd(false, false).rank(1e-12 * a.amax()) < p {
        return false;
    }
    // a pointed nontrivial cone has an extreme ray spanned by p-1 tight rows
    let mut bounded = true;
    for_each_combination(m, p - 1, |idx| {
        if !bounded {
            return;
        }
        let rows = a.select_rows(idx);
        let d = cofactor_normal(&rows);
        let norm = d.norm();
        if norm < 1e-12 {
            return;
        }
        let d = d / norm;
        for dir in [d.clone(), -d] {
            let ad = a * &dir;
            if ad.iter().all(|&x| x <= 1e-12) {
                bounded = false;
            }
        }
    });
    bounded
}

fn enumerate_vertices(a: &Matrix, b: &Vector) -> Result<Vec<Vector>> {
    let (m, p) = a.shape();
    let mut subsets = 1.0f64;
    for k in 0..p {
        subsets *= (m - k) as f64 / (k + 1) as f64;
    }
    if subsets > 2e6 {
        return Err(Error::Unsupported(format!(
            "vertex enumeration over {subsets:.0} facet subsets"
        )));
    }
    let mut vertices: Vec<Vector> = Vec::new();
    for_each_combination(m, p, |idx| {
        let rows = a.select_rows(idx);
        let rhs = Vector::from_iterator(p, idx.iter().map(|&i| b[i]));
        let Some(x) = rows.lu().solve(&rhs) else {
            return;
        };
        if !x.iter().all(|v| v.is_finite()) {
            return;
        }
        let feasible =
            (0..m).all(|i| a.row(i).dot(&x.transpose()) <= b[i] + 1e-9 * (1.0 + b[i].abs()));
        if feasible && !vertices.iter().any(|v| (v - &x).norm() < 1e-9) {
            vertices.push(x);
        }
    });
    Ok(vertices)
}
