//! Per-step noise blocks and the sources that produce them.
//!
//! [`GaussianNoise`] draws fresh normals for every step. [`BrownianPath`] fixes one
//! fine-grained Brownian path and aggregates it exactly onto any coarser step, which
//! couples chains run at different step sizes for strong-error measurements.

use rand::Rng;

use super::operators::{OuCoefficients, OuIncrement};
use super::Scheme;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::random::standard_normal;

/// Noise consumed by one step of a scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseBlock {
    /// One OU increment for each half-step `U(h/2)`.
    Cubu {
        first: OuIncrement,
        second: OuIncrement,
    },
    /// Standard normal for the `O(h)` step.
    Cbaoab { xi: Vector },
    /// Standard normal for the Euler-Maruyama update.
    Cklmc { xi: Vector },
}

impl NoiseBlock {
    /// Number of independent standard normal vectors one step consumes.
    pub fn standard_count(scheme: Scheme) -> usize {
        match scheme {
            Scheme::Cubu => 4,
            Scheme::Cbaoab | Scheme::Cklmc => 1,
        }
    }

    /// Builds the block from `standard_count(scheme)` independent standard normals.
    pub fn from_standard(scheme: Scheme, h: f64, gamma: f64, xs: &[Vector]) -> Self {
        assert_eq!(xs.len(), Self::standard_count(scheme));
        match scheme {
            Scheme::Cubu => {
                let c = OuCoefficients::new(h / 2.0, gamma);
                NoiseBlock::Cubu {
                    first: c.increment(&xs[0], &xs[1]),
                    second: c.increment(&xs[2], &xs[3]),
                }
            }
            Scheme::Cbaoab => NoiseBlock::Cbaoab { xi: xs[0].clone() },
            Scheme::Cklmc => NoiseBlock::Cklmc { xi: xs[0].clone() },
        }
    }

    pub fn zero(scheme: Scheme, dim: usize) -> Self {
        let xs = vec![Vector::zeros(dim); Self::standard_count(scheme)];
        Self::from_standard(scheme, 1.0, 1.0, &xs)
    }
}

pub trait NoiseSource {
    fn next_block(&mut self, scheme: Scheme, h: f64, gamma: f64, dim: usize) -> Result<NoiseBlock>;
}

/// Fresh independent normals from a random stream.
#[derive(Debug, Clone)]
pub struct GaussianNoise<R> {
    rng: R,
}

impl<R: Rng> GaussianNoise<R> {
    pub fn new(rng: R) -> Self {
        Self { rng }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl<R: Rng> NoiseSource for GaussianNoise<R> {
    fn next_block(&mut self, scheme: Scheme, h: f64, gamma: f64, dim: usize) -> Result<NoiseBlock> {
        let xs: Vec<Vector> = (0..NoiseBlock::standard_count(scheme))
            .map(|_| standard_normal(&mut self.rng, dim))
            .collect();
        Ok(NoiseBlock::from_standard(scheme, h, gamma, &xs))
    }
}

/// A Brownian path sampled on a uniform fine grid of spacing `delta`, storing for each
/// fine interval the pair `(∫dW, ∫e^{−γ(s_{k+1}−s)}dW)`.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    delta: f64,
    gamma: f64,
    dim: usize,
    fine: Vec<OuIncrement>,
}

impl BrownianPath {
    pub fn generate(
        horizon: f64,
        delta: f64,
        gamma: f64,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(delta > 0.0 && horizon > 0.0 && gamma > 0.0) {
            return Err(Error::param(
                "delta",
                "horizon, grid spacing and friction must be positive",
            ));
        }
        let steps = (horizon / delta).round() as usize;
        let coeffs = OuCoefficients::new(delta, gamma);
        let fine = (0..steps)
            .map(|_| {
                let a = standard_normal(rng, dim);
                let b = standard_normal(rng, dim);
                coeffs.increment(&a, &b)
            })
            .collect();
        Ok(Self {
            delta,
            gamma,
            dim,
            fine,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.fine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fine.is_empty()
    }

    /// Exact increment over fine intervals `start..start+count`.
    pub fn aggregate(&self, start: usize, count: usize) -> OuIncrement {
        let mut w = Vector::zeros(self.dim);
        let mut ou = Vector::zeros(self.dim);
        let end = start + count;
        for k in start..end {
            let weight = (-self.gamma * self.delta * (end - 1 - k) as f64).exp();
            w += &self.fine[k].w;
            ou += &self.fine[k].ou * weight;
        }
        OuIncrement { w, ou }
    }

    /// A reader that walks the path from time zero.
    pub fn reader(&self) -> PathNoise<'_> {
        PathNoise { path: self, pos: 0 }
    }
}

pub struct PathNoise<'a> {
    path: &'a BrownianPath,
    pos: usize,
}

impl PathNoise<'_> {
    fn fine_steps(&self, t: f64) -> Result<usize> {
        let k = (t / self.path.delta).round();
        if k < 1.0 || (k * self.path.delta - t).abs() > 1e-9 * t {
            return Err(Error::Unsupported(format!(
                "duration {t} is not a multiple of the path grid {}",
                self.path.delta
            )));
        }
        Ok(k as usize)
    }

    fn take(&mut self, count: usize) -> Result<OuIncrement> {
        if self.pos + count > self.path.len() {
            return Err(Error::param("horizon", "Brownian path exhausted"));
        }
        let inc = self.path.aggregate(self.pos, count);
        self.pos += count;
        Ok(inc)
    }
}

impl NoiseSource for PathNoise<'_> {
    fn next_block(&mut self, scheme: Scheme, h: f64, gamma: f64, dim: usize) -> Result<NoiseBlock> {
        if (gamma - self.path.gamma).abs() > 1e-15 * gamma || dim != self.path.dim {
            return Err(Error::param(
                "gamma",
                "path was generated for a different friction or dimension",
            ));
        }
        Ok(match scheme {
            Scheme::Cubu => {
                let half = self.fine_steps(h / 2.0)?;
                NoiseBlock::Cubu {
                    first: self.take(half)?,
                    second: self.take(half)?,
                }
            }
            Scheme::Cbaoab => {
                let n = self.fine_steps(h)?;
                let inc = self.take(n)?;
                let scale = (2.0 * gamma / -(-2.0 * gamma * h).exp_m1()).sqrt();
                NoiseBlock::Cbaoab { xi: inc.ou * scale }
            }
            Scheme::Cklmc => {
                let n = self.fine_steps(h)?;
                let inc = self.take(n)?;
                NoiseBlock::Cklmc {
                    xi: inc.w / h.sqrt(),
                }
            }
        })
    }
}
