//! Closed-form bound constants, admissibility windows and complexity schedules.
//!
//! Universal constants that the theory leaves unspecified are set to 1 and reported
//! under `conventions`. Schedules carry only the polynomial part; the hidden log factor
//! of `Ω̃` is returned as an annotation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::constraints::{ConstraintSet, SetShape};
use crate::error::{Error, Result};
use crate::linalg::sym_eig_range;
use crate::potentials::{PenalizedPotential, Potential};

/// Value used for `C₀` and `C₁`.
pub const UNIVERSAL_CONSTANT: f64 = 1.0;

/// Number of grid cells per `r` used when `osc_K(f)` has no closed form.
pub const OSC_GRID_CELLS: f64 = 100.0;

const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub m: f64,
    pub l: f64,
    pub l1: f64,
    pub m_lambda: f64,
    /// `None` where no Hessian-Lipschitz constant of the penalty is known.
    pub m1_lambda: Option<f64>,
    pub c1: f64,
    pub r: f64,
    pub big_r: f64,
    pub p: usize,
    pub osc: f64,
    pub vol: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// How `osc` was obtained: `"analytic"`, `"vertices"` or `"grid"`.
    pub osc_method: &'static str,
}

impl ProblemConstants {
    /// Constants of a penalized problem; `(σ₁, σ₂)` are zero for full gradients.
    pub fn from_problem(pot: &PenalizedPotential, sigma: (f64, f64)) -> Result<Self> {
        let set = pot.set();
        let (r, big_r) = set.radii();
        let m = pot.base().strong_convexity();
        let m_lambda = pot.smoothness();
        let m1_lambda = match pot.hessian_lipschitz() {
            Ok(v) => Some(v),
            Err(Error::ConstantUnavailable(_)) => None,
            Err(e) => return Err(e),
        };
        let (osc, osc_method) = oscillation(pot.base(), set)?;
        Ok(Self {
            m,
            l: pot.base().smoothness(),
            l1: pot.base().hessian_lipschitz(),
            m_lambda,
            m1_lambda,
            c1: pot.params().c1,
            r,
            big_r,
            p: set.dim(),
            osc,
            vol: set.volume()?,
            sigma1: sigma.0,
            sigma2: sigma.1,
            kappa: m_lambda / m,
            lambda: pot.lambda(),
            osc_method,
        })
    }

    fn m1(&self) -> Result<f64> {
        self.m1_lambda.ok_or_else(|| {
            Error::ConstantUnavailable("Hessian-Lipschitz constant of the penalty".into())
        })
    }
}

/// `sup_K f − inf_K f`. Quadratics attain their infimum 0 at the interior origin and,
/// being convex, their supremum over a polyhedron at a vertex; balls have a closed form.
/// Everything else is evaluated on the grid with step `r/100`, plus vertices if any.
pub fn oscillation(base: &Potential, set: &ConstraintSet) -> Result<(f64, &'static str)> {
    crate::error::check_dim(base.dim(), set.dim())?;
    let vertex_max = || -> Result<f64> {
        set.vertices()
            .iter()
            .map(|v| base.eval(v))
            .try_fold(f64::NEG_INFINITY, |acc, x| Ok(acc.max(x?)))
    };
    if let Some(precision) = base.precision() {
        match set.shape() {
            SetShape::Ball { radius } => {
                return Ok((
                    0.5 * sym_eig_range(precision).1 * radius * radius,
                    "analytic",
                ))
            }
            SetShape::Box { .. } | SetShape::Polytope { .. } => {
                return Ok((vertex_max()?, "vertices"))
            }
            _ => {}
        }
    }
    let (r, big_r) = set.radii();
    let step = r / OSC_GRID_CELLS;
    let per_axis = (2.0 * big_r / step).ceil();
    if per_axis.powi(set.dim() as i32) > MAX_GRID_POINTS as f64 {
        return Err(Error::Unsupported(format!(
            "oscillation grid in dimension {} exceeds {MAX_GRID_POINTS} points",
            set.dim()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in set
        .grid_points(step)
        .iter()
        .filter(|x| set.contains_unchecked(x))
    {
        let f = base.eval(x)?;
        lo = lo.min(f);
        hi = hi.max(f);
    }
    if !set.vertices().is_empty() {
        hi = hi.max(vertex_max()?);
    }
    Ok((hi - lo, "grid"))
}

/// Largest admissible `λ`: `√c₁ r/(p+q) ∧ √c₁ r e^{osc}/(3√π Vol(K) p)`.
pub fn lambda_admissible(c: &ProblemConstants, q: f64) -> f64 {
    let p = c.p as f64;
    let first = c.c1.sqrt() * c.r / (p + q);
    let second = c.c1.sqrt() * c.r * c.osc.exp() / (3.0 * PI.sqrt() * c.vol * p);
    first.min(second)
}

/// Rate of `W_q(ν, ν^λ)` in `λ`, selected by the sign of `1/p + 1/q − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum GapRegime {
    /// `λ`.
    Linear,
    /// `λ log^{1/q}(1/λ)`.
    Logarithmic { q: f64 },
    /// `λ^{1/p+1/q}`.
    Power { exponent: f64 },
}

impl GapRegime {
    pub fn eval(&self, lambda: f64) -> f64 {
        match *self {
            GapRegime::Linear => lambda,
            GapRegime::Logarithmic { q } => lambda * (1.0 / lambda).ln().powf(1.0 / q),
            GapRegime::Power { exponent } => lambda.powf(exponent),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GapRegime::Linear => "lambda",
            GapRegime::Logarithmic { .. } => "lambda*log^(1/q)(1/lambda)",
            GapRegime::Power { .. } => "lambda^(1/p+1/q)",
        }
    }
}

pub fn surrogate_gap_rate(p: usize, q: f64) -> GapRegime {
    let s = 1.0 / p as f64 + 1.0 / q;
    if (s - 1.0).abs() <= 1e-12 {
        GapRegime::Logarithmic { q }
    } else if s > 1.0 {
        GapRegime::Linear
    } else {
        GapRegime::Power { exponent: s }
    }
}

/// `C(p,q) = C₀ [p e^{4 osc} c₁^{−1/2} (max(R,1)/min(r,1))^{2p+1}]^{1/p+1/q}`.
pub fn surrogate_constant(c: &ProblemConstants, q: f64) -> f64 {
    let p = c.p as f64;
    let ratio = c.big_r.max(1.0) / c.r.min(1.0);
    let inner = p * (4.0 * c.osc).exp() / c.c1.sqrt() * ratio.powf(2.0 * p + 1.0);
    UNIVERSAL_CONSTANT * inner.powf(1.0 / p + 1.0 / q)
}

/// Per-step CUBU contraction factor `1 − mh/(3M^λ)`.
pub fn cubu_contraction(m: f64, m_lambda: f64, h: f64) -> f64 {
    1.0 - m * h / (3.0 * m_lambda)
}

/// CUBU discretisation bias `(1/√M^λ + C₁ M₁^λ/(M^λ)²) κ √p h²`.
pub fn cubu_bias(m_lambda: f64, m1_lambda: f64, kappa: f64, p: usize, h: f64) -> f64 {
    (1.0 / m_lambda.sqrt() + UNIVERSAL_CONSTANT * m1_lambda / (m_lambda * m_lambda))
        * kappa
        * (p as f64).sqrt()
        * h
        * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CbaoabTerms {
    /// `21 e^{−mh(n−1)/(4γ)} W₂(ν₀, ν)`.
    pub decay: f64,
    /// `66000 (√M^λ/m)(4√(M^λ p) + 3M₁^λ p/M^λ) γ h²`.
    pub bias: f64,
    /// `h < (1−e^{−γh})/(4√M^λ) ∧ 4γ/m` and `γ ≥ 2√M^λ`.
    pub admissible: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn cbaoab_bound_terms(
    m: f64,
    m_lambda: f64,
    m1_lambda: f64,
    p: usize,
    gamma: f64,
    h: f64,
    n: usize,
    initial_w2: f64,
) -> CbaoabTerms {
    let p = p as f64;
    let decay = 21.0 * (-m * h * (n as f64 - 1.0) / (4.0 * gamma)).exp() * initial_w2;
    let bias = 66000.0
        * (m_lambda.sqrt() / m)
        * (4.0 * (m_lambda * p).sqrt() + 3.0 * m1_lambda * p / m_lambda)
        * gamma
        * h
        * h;
    let window = (-(-gamma * h).exp_m1() / (4.0 * m_lambda.sqrt())).min(4.0 * gamma / m);
    CbaoabTerms {
        decay,
        bias,
        admissible: h < window && gamma >= 2.0 * m_lambda.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgCklmcConstants {
    pub tau: f64,
    pub k1: f64,
    /// Upper end of the admissible step sizes.
    pub h_max: f64,
}

/// `τ`, `K₁` and the step window for stochastic-gradient CKLMC; needs `γ ≥ √(m + M^λ)`.
pub fn sg_cklmc_constants(
    m: f64,
    m_lambda: f64,
    gamma: f64,
    sigma1: f64,
    l: f64,
) -> Result<SgCklmcConstants> {
    if gamma < (m + m_lambda).sqrt() {
        return Err(Error::Inadmissible(format!(
            "friction {gamma} below sqrt(m + M) = {}",
            (m + m_lambda).sqrt()
        )));
    }
    let tau = 0.5 * (0.25f64).min(m / (m_lambda + gamma * gamma / 2.0));
    let g2 = gamma * gamma;
    let k1_a = 16.0
        * (m_lambda * m_lambda + 2.0 * gamma * m_lambda * m_lambda + sigma1 * sigma1 * l * l)
        / ((1.0 - 2.0 * tau) * g2);
    let k1_b = (4.0 * m_lambda + 2.0 * g2 * (1.0 - tau) + 8.0 * gamma) / (1.0 - 2.0 * tau);
    let k1 = k1_a.max(k1_b);
    let h_max = (gamma * tau / (2.0 * k1))
        .min(2.0 / (gamma * tau))
        .min(1.0 / (10.0 * gamma))
        .min(m / (4.0 * gamma * m_lambda));
    Ok(SgCklmcConstants { tau, k1, h_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgCbaoabConstants {
    pub rho: f64,
    pub c_bias: f64,
    pub c_v: f64,
    pub d_v: f64,
    pub lambda_fg: f64,
    pub c_fg: f64,
    pub lambda_sg: f64,
    pub c_sg: f64,
    pub c_mom: f64,
    pub k_noise: f64,
    /// Whether `σ₁² ≤ λ_fg²/(20 (M^λ)² C_V)` holds.
    pub noise_small: bool,
}

/// The chained constants behind the stochastic-gradient CBAOAB bound. They are returned
/// even when the noise-smallness condition fails; check `noise_small`.
#[allow(clippy::too_many_arguments)]
pub fn sg_cbaoab_constants(
    m: f64,
    m_lambda: f64,
    m1_lambda: f64,
    gamma: f64,
    h: f64,
    sigma1: f64,
    p: usize,
    initial_moment: f64,
) -> SgCbaoabConstants {
    let p = p as f64;
    let one_minus = -(-gamma * h).exp_m1();
    let s2 = sigma1 * sigma1;
    let mm = m_lambda * m_lambda;
    let rho = m * h * h / (4.0 * one_minus);
    let c_bias = (m_lambda.sqrt() / m) * ((m_lambda * p).sqrt() + m1_lambda / m_lambda * p);
    let c_v = 3.0 * (2.0 + 0.25 * mm * (1.0 + s2));
    let d_v = one_minus / 16.0;
    let lambda_fg = m.min(gamma) / 16.0;
    let c_fg =
        (10.0 + 8.0 * m_lambda / m + 4.0 * m1_lambda * m1_lambda / (m * m) + 8.0 / gamma) * p;
    let lambda_sg = 0.5 * lambda_fg;
    let c_sg = 2.0 * c_fg + 5.0 * s2 * mm * d_v * p / (lambda_fg * h);
    let c_mom = initial_moment + c_sg / lambda_sg;
    let k_noise = (s2 * mm * (c_v * c_mom + d_v * p)).sqrt();
    SgCbaoabConstants {
        rho,
        c_bias,
        c_v,
        d_v,
        lambda_fg,
        c_fg,
        lambda_sg,
        c_sg,
        c_mom,
        k_noise,
        noise_small: s2 <= lambda_fg * lambda_fg / (20.0 * mm * c_v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TargetMetric {
    W1,
    W2,
}

/// Exponents of one schedule row: `h = ε^{h}`, `n = ε^{−n}`, `b = ε^{−b}`, `λ = h^{λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub h: f64,
    pub n: f64,
    pub b: Option<f64>,
    pub lambda_in_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub id: String,
    pub metric: TargetMetric,
    pub epsilon: f64,
    pub p: usize,
    pub h: f64,
    pub lambda: f64,
    /// `ε^{−e}` before rounding up.
    pub n_exact: f64,
    pub n: u64,
    pub b_exact: Option<f64>,
    pub b: Option<u64>,
    pub exponents: Exponents,
    pub log_factor: &'static str,
}

/// Recognised schedule identifiers.
pub const SCHEDULE_IDS: [&str; 10] = [
    "3.1a", "3.1b", "3.2a", "3.2b", "3.3a", "3.3b", "3.4a", "3.4b", "3.5a", "3.5b",
];

/// Exponents of a schedule row for dimension `p`.
pub fn schedule_exponents(id: &str, p: usize) -> Result<(TargetMetric, Exponents)> {
    let p = p as f64;
    use TargetMetric::*;
    let row = |metric, h, n, b, lambda_in_h| {
        (
            metric,
            Exponents {
                h,
                n,
                b,
                lambda_in_h,
            },
        )
    };
    Ok(match id {
        // CUBU
        "3.1a" => row(
            W2,
            (3.0 * p + 2.0) / (2.0 * p + 4.0),
            (11.0 * p + 2.0) / (2.0 * p + 4.0),
            None,
            4.0 * p / (3.0 * p + 2.0),
        ),
        "3.1b" => row(W1, 1.0, 3.0, None, 1.0),
        // SG-CUBU
        "3.2a" => row(
            W2,
            2.0 * p / (p + 2.0),
            4.0 * p / (p + 2.0),
            Some((6.0 * p + 4.0) / (p + 2.0)),
            1.0,
        ),
        "3.2b" => row(W1, 1.0, 2.0, Some(4.0), 1.0),
        // CBAOAB
        "3.3a" => row(
            W2,
            (7.0 * p + 2.0) / (2.0 * p + 4.0),
            (11.0 * p + 2.0) / (2.0 * p + 4.0),
            None,
            4.0 * p / (7.0 * p + 2.0),
        ),
        "3.3b" => row(W1, 2.0, 3.0, None, 0.5),
        // SG-CBAOAB
        "3.4a" => row(
            W2,
            (7.0 * p + 2.0) / (2.0 * p + 4.0),
            (11.0 * p + 2.0) / (2.0 * p + 4.0),
            Some((7.0 * p + 2.0) / (p + 2.0)),
            4.0 * p / (7.0 * p + 2.0),
        ),
        "3.4b" => row(W1, 2.0, 3.0, Some(4.0), 0.5),
        // SG-CKLMC
        "3.5a" => row(
            W2,
            8.0 * p / (p + 2.0),
            10.0 * p / (p + 2.0),
            Some(8.0 * p / (p + 2.0)),
            0.25,
        ),
        "3.5b" => row(W1, 4.0, 5.0, Some(4.0), 0.25),
        _ => {
            return Err(Error::Unknown {
                kind: "schedule",
                name: id.to_string(),
            })
        }
    })
}

fn round_up(x: f64) -> u64 {
    // tolerate rounding in ε^{−e} so exact integers are not bumped
    (x * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

/// Step, penalty, batch and iteration count of a schedule with unit leading constants.
pub fn schedule(id: &str, epsilon: f64, p: usize) -> Result<Schedule> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in (0, 1), got {epsilon}"),
        ));
    }
    if p <= 2 {
        return Err(Error::param("p", format!("schedules need p > 2, got {p}")));
    }
    let (metric, e) = schedule_exponents(id, p)?;
    let h = epsilon.powf(e.h);
    let n_exact = epsilon.powf(-e.n);
    let b_exact = e.b.map(|b| epsilon.powf(-b));
    Ok(Schedule {
        id: id.to_string(),
        metric,
        epsilon,
        p,
        h,
        lambda: h.powf(e.lambda_in_h),
        n_exact,
        n: round_up(n_exact),
        b_exact,
        b: b_exact.map(round_up),
        exponents: e,
        log_factor: "n is the polynomial part of an Omega-tilde bound; multiply by a power of log(1/epsilon) of unspecified degree",
    })
}

/// All constants and terms for one configuration, as reported by the harness and CLI.
pub fn report(c: &ProblemConstants, gamma: f64, h: f64, n: usize) -> serde_json::Value {
    let unavailable = |e: Error| serde_json::json!({ "unavailable": e.to_string() });
    let cubu = match c.m1() {
        Ok(m1) => serde_json::json!({
            "contraction": cubu_contraction(c.m, c.m_lambda, h),
            "bias": cubu_bias(c.m_lambda, m1, c.kappa, c.p, h),
        }),
        Err(e) => serde_json::json!({
            "contraction": cubu_contraction(c.m, c.m_lambda, h),
            "bias": unavailable(e),
        }),
    };
    let cbaoab = match c.m1() {
        Ok(m1) => serde_json::to_value(cbaoab_bound_terms(
            c.m, c.m_lambda, m1, c.p, gamma, h, n, 1.0,
        ))
        .expect("plain struct"),
        Err(e) => unavailable(e),
    };
    let sg_cklmc = match sg_cklmc_constants(c.m, c.m_lambda, gamma, c.sigma1, c.l) {
        Ok(k) => serde_json::to_value(k).expect("plain struct"),
        Err(e) => unavailable(e),
    };
    let sg_cbaoab = match c.m1() {
        Ok(m1) => serde_json::to_value(sg_cbaoab_constants(
            c.m, c.m_lambda, m1, gamma, h, c.sigma1, c.p, c.p as f64,
        ))
        .expect("plain struct"),
        Err(e) => unavailable(e),
    };
    let regime = surrogate_gap_rate(c.p, 2.0);
    serde_json::json!({
        "constants": c,
        "lambda_admissible": { "q1": lambda_admissible(c, 1.0), "q2": lambda_admissible(c, 2.0) },
        "lambda_is_admissible": c.lambda < lambda_admissible(c, 2.0),
        "surrogate_gap": {
            "w1": surrogate_gap_rate(c.p, 1.0).label(),
            "w2": regime.label(),
            "c_p1": surrogate_constant(c, 1.0),
            "c_p2": surrogate_constant(c, 2.0),
        },
        "cubu": cubu,
        "cbaoab": cbaoab,
        "sg_cklmc": sg_cklmc,
        "sg_cbaoab": sg_cbaoab,
        "conventions": { "C0": UNIVERSAL_CONSTANT, "C1": UNIVERSAL_CONSTANT, "cbaoab_initial_w2": 1.0, "sg_cbaoab_initial_moment": "p" },
    })
}
