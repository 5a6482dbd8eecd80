//! One step of each scheme, parameterised by a gradient callback.

use super::noise::NoiseBlock;
use super::operators::{op_a, op_b, op_o, op_u};
use super::{KineticState, Scheme};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// `U(h/2) ∘ B(h) ∘ U(h/2)`: one gradient per step.
pub fn step_cubu(
    state: &KineticState,
    h: f64,
    gamma: f64,
    grad: &mut dyn FnMut(&Vector) -> Result<Vector>,
    noise: &NoiseBlock,
) -> Result<KineticState> {
    let NoiseBlock::Cubu { first, second } = noise else {
        return Err(wrong_block(Scheme::Cubu));
    };
    let s = op_u(state, h / 2.0, gamma, first);
    let g = grad(&s.theta)?;
    let s = op_b(&s, h, &g);
    Ok(op_u(&s, h / 2.0, gamma, second))
}

/// `B(h/2) A(h/2) O(h) A(h/2) B(h/2)`. The trailing gradient is stored in `cache`
/// and reused by the next step's leading half-kick when the position matches.
pub fn step_cbaoab(
    state: &KineticState,
    h: f64,
    gamma: f64,
    grad: &mut dyn FnMut(&Vector) -> Result<Vector>,
    noise: &NoiseBlock,
    cache: &mut Option<(Vector, Vector)>,
) -> Result<KineticState> {
    let NoiseBlock::Cbaoab { xi } = noise else {
        return Err(wrong_block(Scheme::Cbaoab));
    };
    let g0 = match cache.take() {
        Some((theta, g)) if theta == state.theta => g,
        _ => grad(&state.theta)?,
    };
    let s = op_b(state, h / 2.0, &g0);
    let s = op_a(&s, h / 2.0);
    let s = op_o(&s, h, gamma, xi);
    let s = op_a(&s, h / 2.0);
    let g1 = grad(&s.theta)?;
    let s = op_b(&s, h / 2.0, &g1);
    *cache = Some((s.theta.clone(), g1));
    Ok(s)
}

/// Euler-Maruyama: `θ ← θ + hv`, `v ← v − hG(θ) − hγv + √(2γh)ξ`, both from the old state.
pub fn step_cklmc(
    state: &KineticState,
    h: f64,
    gamma: f64,
    grad: &mut dyn FnMut(&Vector) -> Result<Vector>,
    noise: &NoiseBlock,
) -> Result<KineticState> {
    let NoiseBlock::Cklmc { xi } = noise else {
        return Err(wrong_block(Scheme::Cklmc));
    };
    let g = grad(&state.theta)?;
    let theta = &state.theta + &state.v * h;
    let v = &state.v - g * h - &state.v * (h * gamma) + xi * (2.0 * gamma * h).sqrt();
    Ok(KineticState { theta, v })
}

fn wrong_block(scheme: Scheme) -> Error {
    Error::param(
        "noise",
        format!("noise block does not belong to {}", scheme.name()),
    )
}

/// Stateful stepper holding the CBAOAB gradient cache.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: Scheme,
    gamma: f64,
    cache: Option<(Vector, Vector)>,
}

impl Stepper {
    pub fn new(scheme: Scheme, gamma: f64) -> Self {
        Self {
            scheme,
            gamma,
            cache: None,
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn step(
        &mut self,
        state: &KineticState,
        h: f64,
        grad: &mut dyn FnMut(&Vector) -> Result<Vector>,
        noise: &NoiseBlock,
    ) -> Result<KineticState> {
        match self.scheme {
            Scheme::Cubu => step_cubu(state, h, self.gamma, grad, noise),
            Scheme::Cbaoab => step_cbaoab(state, h, self.gamma, grad, noise, &mut self.cache),
            Scheme::Cklmc => step_cklmc(state, h, self.gamma, grad, noise),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::operators::OuCoefficients;
    use crate::linalg::Matrix;

    fn one(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    /// Mean map of one step on `f(θ) = kθ²/2`, probed column by column.
    fn probe(scheme: Scheme, h: f64, gamma: f64, k: f64) -> Matrix {
        let mut m = Matrix::zeros(2, 2);
        for (j, (t, v)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
            let state = KineticState::new(one(t), one(v)).unwrap();
            let mut grad = |x: &Vector| Ok(x * k);
            let out = Stepper::new(scheme, gamma)
                .step(&state, h, &mut grad, &NoiseBlock::zero(scheme, 1))
                .unwrap();
            m[(0, j)] = out.theta[0];
            m[(1, j)] = out.v[0];
        }
        m
    }

    fn u_map(t: f64, gamma: f64) -> Matrix {
        let c = OuCoefficients::new(t, gamma);
        Matrix::from_row_slice(2, 2, &[1.0, c.one_minus_decay / gamma, 0.0, c.decay])
    }

    fn b_map(h: f64, k: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, -h * k, 1.0])
    }

    fn a_map(t: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0])
    }

    fn o_map(t: f64, gamma: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, (-gamma * t).exp()])
    }

    #[test]
    fn affine_maps_match_operator_products() {
        for &(h, gamma, k) in &[(0.1, 2.0, 1.0), (0.37, 0.5, 3.0), (0.01, 8.0, 0.2)] {
            let ubu = u_map(h / 2.0, gamma) * b_map(h, k) * u_map(h / 2.0, gamma);
            assert!((probe(Scheme::Cubu, h, gamma, k) - ubu).amax() < 1e-14);

            let baoab = b_map(h / 2.0, k)
                * a_map(h / 2.0)
                * o_map(h, gamma)
                * a_map(h / 2.0)
                * b_map(h / 2.0, k);
            assert!((probe(Scheme::Cbaoab, h, gamma, k) - baoab).amax() < 1e-14);

            let em = Matrix::from_row_slice(2, 2, &[1.0, h, -h * k, 1.0 - h * gamma]);
            assert!((probe(Scheme::Cklmc, h, gamma, k) - em).amax() < 1e-14);
        }
    }

    #[test]
    fn gradient_budget() {
        for (scheme, expected) in [
            (Scheme::Cubu, 50),
            (Scheme::Cbaoab, 51),
            (Scheme::Cklmc, 50),
        ] {
            let mut calls = 0usize;
            let mut grad = |x: &Vector| {
                calls += 1;
                Ok(x.clone())
            };
            let mut stepper = Stepper::new(scheme, 2.0);
            let mut state = KineticState::new(one(0.5), one(-0.2)).unwrap();
            for _ in 0..50 {
                state = stepper
                    .step(&state, 0.1, &mut grad, &NoiseBlock::zero(scheme, 1))
                    .unwrap();
            }
            assert_eq!(calls, expected, "{scheme:?}");
        }
    }

    #[test]
    fn mismatched_noise_is_rejected() {
        let state = KineticState::new(one(0.0), one(0.0)).unwrap();
        let mut grad = |x: &Vector| Ok(x.clone());
        let err = step_cubu(
            &state,
            0.1,
            2.0,
            &mut grad,
            &NoiseBlock::zero(Scheme::Cklmc, 1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn large_friction_limit_of_cubu() {
        let state = KineticState::new(one(0.0), one(1.0)).unwrap();
        let mut grad = |x: &Vector| Ok(x * 0.0);
        let out = step_cubu(
            &state,
            0.1,
            1e4,
            &mut grad,
            &NoiseBlock::zero(Scheme::Cubu, 1),
        )
        .unwrap();
        assert!(out.v[0].abs() < 1e-100);
        assert!((out.theta[0] - 1e-4).abs() < 1e-12);
    }
}
