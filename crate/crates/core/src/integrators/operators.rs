//! The elementary flows `U`, `B`, `A`, `O` of kinetic Langevin dynamics.

use super::KineticState;
use crate::linalg::Vector;

/// The correlated Gaussian pair driving an exact OU flow of duration `t`:
/// `w = ∫dW` and `ou = ∫e^{−γ(t−s)}dW`, per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct OuIncrement {
    pub w: Vector,
    pub ou: Vector,
}

/// Coefficients mapping two independent standard normals onto an [`OuIncrement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuCoefficients {
    /// `e^{−γt}`.
    pub decay: f64,
    /// `1 − e^{−γt}`.
    pub one_minus_decay: f64,
    /// `√t`.
    pub w_scale: f64,
    /// Weight of `ξ₁` in `ou`.
    pub ou_shared: f64,
    /// Weight of `ξ₂` in `ou`.
    pub ou_own: f64,
}

impl OuCoefficients {
    pub fn new(t: f64, gamma: f64) -> Self {
        let x = gamma * t;
        let one_minus_decay = -(-x).exp_m1();
        let ou_var = -(-2.0 * x).exp_m1() / (2.0 * gamma);
        // squared correlation c = (2/x)·tanh(x/2); 1 − c by series when x is tiny
        let one_minus_c = if x < 1e-2 {
            let x2 = x * x;
            x2 / 12.0 - x2 * x2 / 120.0 + 17.0 * x2 * x2 * x2 / 20160.0
        } else {
            1.0 - 2.0 * one_minus_decay / (x * (2.0 - one_minus_decay))
        };
        let c = 1.0 - one_minus_c;
        Self {
            decay: 1.0 - one_minus_decay,
            one_minus_decay,
            w_scale: t.sqrt(),
            ou_shared: (ou_var * c).sqrt(),
            ou_own: (ou_var * one_minus_c).sqrt(),
        }
    }

    pub fn increment(&self, xi1: &Vector, xi2: &Vector) -> OuIncrement {
        OuIncrement {
            w: xi1 * self.w_scale,
            ou: xi1 * self.ou_shared + xi2 * self.ou_own,
        }
    }
}

/// Exact OU flow over duration `t`:
/// `v' = e^{−γt}v + √(2γ)·ou`, `θ' = θ + (1−e^{−γt})v/γ + √(2/γ)(w − ou)`.
pub fn op_u(state: &KineticState, t: f64, gamma: f64, z: &OuIncrement) -> KineticState {
    let one_minus = -(-gamma * t).exp_m1();
    let decay = 1.0 - one_minus;
    let theta =
        &state.theta + &state.v * (one_minus / gamma) + (&z.w - &z.ou) * (2.0 / gamma).sqrt();
    let v = &state.v * decay + &z.ou * (2.0 * gamma).sqrt();
    KineticState { theta, v }
}

/// Kick `v ← v − h·g` with a precomputed gradient `g`.
pub fn op_b(state: &KineticState, h: f64, grad: &Vector) -> KineticState {
    KineticState {
        theta: state.theta.clone(),
        v: &state.v - grad * h,
    }
}

/// Free drift `θ ← θ + t·v`.
pub fn op_a(state: &KineticState, t: f64) -> KineticState {
    KineticState {
        theta: &state.theta + &state.v * t,
        v: state.v.clone(),
    }
}

/// Exact velocity OU flow over duration `t`: `v ← e^{−γt}v + √(1−e^{−2γt})ξ`.
pub fn op_o(state: &KineticState, t: f64, gamma: f64, xi: &Vector) -> KineticState {
    let decay = (-gamma * t).exp();
    let noise = (-(-2.0 * gamma * t).exp_m1()).sqrt();
    KineticState {
        theta: state.theta.clone(),
        v: &state.v * decay + xi * noise,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(theta: f64, v: f64) -> KineticState {
        KineticState::new(Vector::from_element(1, theta), Vector::from_element(1, v)).unwrap()
    }

    #[test]
    fn zero_noise_u_is_the_mean_flow() {
        let z = OuIncrement {
            w: Vector::zeros(1),
            ou: Vector::zeros(1),
        };
        let out = op_u(&s(0.3, 1.5), 0.7, 2.0, &z);
        let eta = (-1.4f64).exp();
        assert!((out.theta[0] - (0.3 + (1.0 - eta) * 1.5 / 2.0)).abs() < 1e-15);
        assert!((out.v[0] - eta * 1.5).abs() < 1e-15);
    }

    #[test]
    fn series_branch_matches_closed_form() {
        // just below the switch the closed form still has ~1e-11 relative accuracy
        let (t, gamma) = (0.99e-2, 1.0);
        let c = OuCoefficients::new(t, gamma);
        let x: f64 = gamma * t;
        let one_minus = -(-x).exp_m1();
        let direct = 1.0 - 2.0 * one_minus / (x * (2.0 - one_minus));
        let ou_var = -(-2.0 * x).exp_m1() / (2.0 * gamma);
        assert!((c.ou_own - (ou_var * direct).sqrt()).abs() < 1e-9 * c.ou_own);
    }

    #[test]
    fn kicks_and_drifts() {
        let out = op_b(&s(1.0, 0.0), 0.1, &Vector::from_element(1, 1.0));
        assert_eq!((out.theta[0], out.v[0]), (1.0, -0.1));
        let out = op_a(&s(1.0, 0.0), 0.5);
        assert_eq!(out, s(1.0, 0.0));
        let out = op_o(&s(0.0, 2.0), 1e3, 2.0, &Vector::zeros(1));
        assert_eq!(out.v[0], 0.0);
    }
}
