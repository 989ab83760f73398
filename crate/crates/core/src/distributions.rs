//! Distributions of regular errors.
//!
//! A regular error follows a deterministic law (a cyclic sine error, the
//! sawtooth of a rounding error) yet the population of all its possible
//! values has a proper density, zero expectation and a finite variance.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::error_model::ErrorSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularErrorDistribution {
    /// `δ = A·sin(θ)` with the phase uniform over a cycle.
    ArcsineCyclic { amplitude: f64 },
    /// Uniform on `[-a, a]`, the rounding error of a quantized reading.
    UniformRounding { half_width: f64 },
    Normal { sigma: f64 },
}

impl RegularErrorDistribution {
    pub fn arcsine(amplitude: f64) -> Result<Self> {
        positive("amplitude", amplitude)?;
        Ok(Self::ArcsineCyclic { amplitude })
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        positive("half_width", half_width)?;
        Ok(Self::UniformRounding { half_width })
    }

    pub fn normal(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::input("sigma", format!("must be finite and non-negative, got {sigma}")));
        }
        Ok(Self::Normal { sigma })
    }

    /// Re-checks the parameter invariants of a value built by hand.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ArcsineCyclic { amplitude } => positive("amplitude", amplitude),
            Self::UniformRounding { half_width } => positive("half_width", half_width),
            Self::Normal { sigma } => Self::normal(sigma).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ArcsineCyclic { .. } => "arcsine",
            Self::UniformRounding { .. } => "uniform",
            Self::Normal { .. } => "normal",
        }
    }

    /// Probability density at `delta`.
    ///
    /// The arcsine density is unbounded at `|δ| = A`; exactly there this
    /// returns `f64::INFINITY`. A zero-sigma normal is a point mass and is
    /// reported the same way at zero.
    pub fn pdf(&self, delta: f64) -> f64 {
        match *self {
            Self::ArcsineCyclic { amplitude } => {
                let d = delta.abs();
                if d > amplitude {
                    0.0
                } else if d == amplitude {
                    f64::INFINITY
                } else {
                    1.0 / (PI * ((amplitude - d) * (amplitude + d)).sqrt())
                }
            }
            Self::UniformRounding { half_width } => {
                if delta.abs() <= half_width {
                    1.0 / (2.0 * half_width)
                } else {
                    0.0
                }
            }
            Self::Normal { sigma } => {
                if sigma == 0.0 {
                    if delta == 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    let z = delta / sigma;
                    (-0.5 * z * z).exp() / (sigma * TAU.sqrt())
                }
            }
        }
    }

    /// Always zero: every error has zero expectation.
    pub fn expectation(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::ArcsineCyclic { amplitude } => amplitude * amplitude / 2.0,
            Self::UniformRounding { half_width } => half_width * half_width / 3.0,
            Self::Normal { sigma } => sigma * sigma,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Closed support `[lo, hi]`; unbounded for the normal kind.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::ArcsineCyclic { amplitude } => (-amplitude, amplitude),
            Self::UniformRounding { half_width } => (-half_width, half_width),
            Self::Normal { sigma: 0.0 } => (0.0, 0.0),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Draws one value from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::ArcsineCyclic { amplitude } => {
                let phase: f64 = rng.random::<f64>() * TAU;
                amplitude * phase.sin()
            }
            Self::UniformRounding { half_width } => {
                let u: f64 = rng.random();
                half_width * (2.0 * u - 1.0)
            }
            Self::Normal { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                }
            }
        }
    }

    /// `count` values drawn from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<ErrorSequence> {
        if count == 0 {
            return Err(Error::input("count", "sample count must be at least 1"));
        }
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..count).map(|_| self.draw(&mut rng)).collect();
        ErrorSequence::new(values, self.name())
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::input(field, format!("must be finite and positive, got {value}")))
    }
}

/// Reference point about which the second moment is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Center {
    /// The values are errors; their expectation is zero by definition.
    Zero,
    /// The values are arbitrary; center on their sample mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Sample mean and second moment with divisor `n`.
pub fn empirical_moments(samples: &ErrorSequence, center: Center) -> Result<Moments> {
    let values = samples.values();
    if values.is_empty() {
        return Err(Error::input("samples", "at least one sample is required"));
    }
    // Welford updates: a constant sequence keeps its mean exactly and
    // accumulates no spread.
    let mut mean = 0.0;
    let mut spread = 0.0;
    for (k, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        spread += delta * (v - mean);
    }
    let n = values.len() as f64;
    let variance = match center {
        Center::Zero => values.iter().map(|v| v * v).sum::<f64>() / n,
        Center::Mean => spread / n,
    };
    Ok(Moments { mean, variance })
}
