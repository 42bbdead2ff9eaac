//! Proof-of-work delay distributions.
//!
//! A delay law supplies three things the rest of the crate needs: a sampler
//! (inverse-CDF, one uniform per draw), the CDF `P(H <= v)` and its running
//! integral `∫₀ᵛ P(H <= u) du`. The fluid solver additionally needs either the
//! point-mass location or the density on the support.
//!
//! [`DelayModel`] covers the fixed, exponential and uniform laws. New laws can
//! be plugged into the solvers by implementing [`DelayDistribution`].

use std::fmt;

use rand::distr::Open01;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelayError {
    #[error("degenerate delay: zero mean delay has only the trivial equilibrium l = 0")]
    DegenerateDelay,
    #[error("invalid delay parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("delay functions are defined for v >= 0, got v = {0}")]
    NegativeTime(f64),
}

/// How the delay law enters the fluid kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayLaw {
    /// All mass at a single delay.
    PointMass(f64),
    /// Absolutely continuous with a density on [`DelayDistribution::support`].
    Density,
}

/// A delay distribution usable by the simulator and the solvers.
///
/// Implementors provide the unchecked closed forms; the checked accessors and
/// the sampler are derived from them.
pub trait DelayDistribution: fmt::Debug + Send + Sync {
    fn mean(&self) -> f64;

    /// Inverse CDF on the open unit interval.
    fn quantile(&self, u: f64) -> f64;

    /// `P(H <= v)` for `v >= 0`.
    fn cdf_unchecked(&self, v: f64) -> f64;

    /// `∫₀ᵛ P(H <= u) du` for `v >= 0`.
    fn integrated_cdf_unchecked(&self, v: f64) -> f64;

    fn law(&self) -> DelayLaw;

    /// Density inside the support, endpoints included. Zero for point masses.
    fn pdf(&self, x: f64) -> f64;

    /// Closed support `[lo, hi]`; `hi` may be infinite.
    fn support(&self) -> (f64, f64);

    /// Points where the CDF or its derivative is discontinuous.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    fn cdf(&self, v: f64) -> Result<f64, DelayError> {
        check_time(v)?;
        Ok(self.cdf_unchecked(v))
    }

    fn integrated_cdf(&self, v: f64) -> Result<f64, DelayError> {
        check_time(v)?;
        Ok(self.integrated_cdf_unchecked(v))
    }
}

fn check_time(v: f64) -> Result<(), DelayError> {
    if v < 0.0 || v.is_nan() {
        Err(DelayError::NegativeTime(v))
    } else {
        Ok(())
    }
}

/// Config-file form of a delay law, e.g. `{"type":"uniform","h0":1.0,"h1":11.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DelaySpec {
    Fixed { h: f64 },
    Exponential { mu: f64 },
    Uniform { h0: f64, h1: f64 },
}

/// A validated delay law. Parameters are checked on every construction path,
/// including deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DelaySpec", into = "DelaySpec")]
pub enum DelayModel {
    Fixed { h: f64 },
    Exponential { mu: f64 },
    Uniform { h0: f64, h1: f64 },
}

impl DelayModel {
    pub fn fixed(h: f64) -> Result<Self, DelayError> {
        Self::try_from(DelaySpec::Fixed { h })
    }

    pub fn exponential(mu: f64) -> Result<Self, DelayError> {
        Self::try_from(DelaySpec::Exponential { mu })
    }

    pub fn uniform(h0: f64, h1: f64) -> Result<Self, DelayError> {
        Self::try_from(DelaySpec::Uniform { h0, h1 })
    }

    /// The same law with every time parameter multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self, DelayError> {
        match *self {
            DelayModel::Fixed { h } => Self::fixed(h * c),
            DelayModel::Exponential { mu } => Self::exponential(mu / c),
            DelayModel::Uniform { h0, h1 } => Self::uniform(h0 * c, h1 * c),
        }
    }

    pub fn spec(&self) -> DelaySpec {
        DelaySpec::from(*self)
    }
}

impl TryFrom<DelaySpec> for DelayModel {
    type Error = DelayError;

    fn try_from(spec: DelaySpec) -> Result<Self, Self::Error> {
        let invalid = |name, value, reason| DelayError::InvalidParameter {
            name,
            value,
            reason,
        };
        match spec {
            DelaySpec::Fixed { h } => {
                if h.is_nan() || h < 0.0 || h.is_infinite() {
                    return Err(invalid("h", h, "must be finite and positive"));
                }
                if h == 0.0 {
                    return Err(DelayError::DegenerateDelay);
                }
                Ok(DelayModel::Fixed { h })
            }
            DelaySpec::Exponential { mu } => {
                if mu.is_nan() || mu <= 0.0 {
                    return Err(invalid("mu", mu, "rate must be positive"));
                }
                if mu.is_infinite() {
                    return Err(DelayError::DegenerateDelay);
                }
                Ok(DelayModel::Exponential { mu })
            }
            DelaySpec::Uniform { h0, h1 } => {
                if !h0.is_finite() || h0 < 0.0 {
                    return Err(invalid("h0", h0, "must be finite and nonnegative"));
                }
                if !h1.is_finite() {
                    return Err(invalid("h1", h1, "must be finite"));
                }
                if h0 == 0.0 && h1 == 0.0 {
                    return Err(DelayError::DegenerateDelay);
                }
                if h1 <= h0 {
                    return Err(invalid("h1", h1, "must exceed h0"));
                }
                Ok(DelayModel::Uniform { h0, h1 })
            }
        }
    }
}

impl From<DelayModel> for DelaySpec {
    fn from(model: DelayModel) -> Self {
        match model {
            DelayModel::Fixed { h } => DelaySpec::Fixed { h },
            DelayModel::Exponential { mu } => DelaySpec::Exponential { mu },
            DelayModel::Uniform { h0, h1 } => DelaySpec::Uniform { h0, h1 },
        }
    }
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayModel::Fixed { h } => write!(f, "fixed(h={h})"),
            DelayModel::Exponential { mu } => write!(f, "exponential(mu={mu})"),
            DelayModel::Uniform { h0, h1 } => write!(f, "uniform(h0={h0}, h1={h1})"),
        }
    }
}

impl DelayDistribution for DelayModel {
    fn mean(&self) -> f64 {
        match *self {
            DelayModel::Fixed { h } => h,
            DelayModel::Exponential { mu } => 1.0 / mu,
            DelayModel::Uniform { h0, h1 } => 0.5 * (h0 + h1),
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        match *self {
            DelayModel::Fixed { h } => h,
            // -ln(1 - u) / mu
            DelayModel::Exponential { mu } => -(-u).ln_1p() / mu,
            DelayModel::Uniform { h0, h1 } => h0 + u * (h1 - h0),
        }
    }

    fn cdf_unchecked(&self, v: f64) -> f64 {
        match *self {
            DelayModel::Fixed { h } => {
                if v >= h {
                    1.0
                } else {
                    0.0
                }
            }
            DelayModel::Exponential { mu } => -(-mu * v).exp_m1(),
            DelayModel::Uniform { h0, h1 } => ((v - h0) / (h1 - h0)).clamp(0.0, 1.0),
        }
    }

    fn integrated_cdf_unchecked(&self, v: f64) -> f64 {
        match *self {
            DelayModel::Fixed { h } => (v - h).max(0.0),
            // v + e^{-mu v}/mu - 1/mu, written to avoid cancellation
            DelayModel::Exponential { mu } => v + (-mu * v).exp_m1() / mu,
            DelayModel::Uniform { h0, h1 } => {
                if v <= h0 {
                    0.0
                } else if v <= h1 {
                    (v - h0) * (v - h0) / (2.0 * (h1 - h0))
                } else {
                    v - 0.5 * (h0 + h1)
                }
            }
        }
    }

    fn law(&self) -> DelayLaw {
        match *self {
            DelayModel::Fixed { h } => DelayLaw::PointMass(h),
            _ => DelayLaw::Density,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            DelayModel::Fixed { .. } => 0.0,
            DelayModel::Exponential { mu } => {
                if x < 0.0 {
                    0.0
                } else {
                    mu * (-mu * x).exp()
                }
            }
            DelayModel::Uniform { h0, h1 } => {
                if (h0..=h1).contains(&x) {
                    1.0 / (h1 - h0)
                } else {
                    0.0
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            DelayModel::Fixed { h } => (h, h),
            DelayModel::Exponential { .. } => (0.0, f64::INFINITY),
            DelayModel::Uniform { h0, h1 } => (h0, h1),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            DelayModel::Fixed { h } => vec![h],
            DelayModel::Exponential { .. } => Vec::new(),
            DelayModel::Uniform { h0, h1 } => vec![h0, h1],
        }
    }
}
