//! Stationary tip-age profile and equilibrium tip count.
//!
//! At equilibrium the age profile is
//! `g(v) = exp(−(2/l) ∫₀ᵛ P(H <= u) du)` and `l` solves the scalar fixed
//! point `l = F(l) = ∫₀^∞ g(v) dv`. A point-mass delay `h` gives `l = 2h`
//! in closed form; every other law is solved by bisection on `F(l) − l`.

use serde::Serialize;
use statrs::function::erf::erf;
use thiserror::Error;

use crate::delay::{DelayDistribution, DelayError, DelayLaw, DelayModel};
use crate::quad::adaptive_simpson_split;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// The profile integral is cut where `g` drops below this.
const TAIL_CUTOFF: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;
const MAX_WIDENINGS: usize = 40;
const UNIQUENESS_SCAN: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error("equilibrium tip count must be positive, got l = {0}")]
    NonPositiveL(f64),
    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("arrival rate must be finite and positive, got {0}")]
    InvalidLambda(f64),
    #[error("no sign change of F(l) - l on [{lo}, {hi}]: G(lo) = {g_lo}, G(hi) = {g_hi}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error("F(l) - l changes sign {count} times on [{lo}, {hi}]; the equilibrium is not unique")]
    MultipleRoots { count: usize, lo: f64, hi: f64 },
    #[error("bisection stopped at l = {l} with residual {residual} above tolerance {tol}")]
    NotConverged { l: f64, residual: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult<D = DelayModel> {
    /// Rescaled equilibrium tip count, in time units.
    pub l: f64,
    /// `|∫₀^∞ g(v) dv − l|` at the returned `l`.
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
    #[serde(skip)]
    delay: D,
}

impl<D: DelayDistribution> StationaryResult<D> {
    /// The stationary age density `g(v)`.
    pub fn profile(&self, v: f64) -> Result<f64, StationaryError> {
        stationary_profile(&self.delay, self.l, v)
    }

    pub fn delay(&self) -> &D {
        &self.delay
    }
}

pub fn stationary_profile<D: DelayDistribution + ?Sized>(
    delay: &D,
    l: f64,
    v: f64,
) -> Result<f64, StationaryError> {
    if l.is_nan() || l <= 0.0 {
        return Err(StationaryError::NonPositiveL(l));
    }
    Ok((-2.0 / l * delay.integrated_cdf(v)?).exp())
}

/// `F(l) = ∫₀^∞ g(v) dv`, truncated where `g < 1e-14`.
///
/// Since `∫₀ᵛ P(H <= u) du >= v − E[H]`, the integrand is below the cutoff
/// past `E[H] + (l/2) ln(1e14)`.
pub fn profile_integral<D: DelayDistribution + ?Sized>(delay: &D, l: f64, tol: f64) -> f64 {
    let end = delay.mean() + 0.5 * l * (1.0 / TAIL_CUTOFF).ln();
    let scale = 2.0 / l;
    adaptive_simpson_split(
        |v| (-scale * delay.integrated_cdf_unchecked(v)).exp(),
        0.0,
        end,
        &delay.breakpoints(),
        tol,
    )
    .value
}

fn check_delay<D: DelayDistribution + ?Sized>(delay: &D) -> Result<f64, StationaryError> {
    let mean = delay.mean();
    if !mean.is_finite() || mean <= 0.0 {
        return Err(DelayError::DegenerateDelay.into());
    }
    Ok(mean)
}

/// Solves for the equilibrium `l` and its profile.
pub fn solve_stationary<D>(delay: &D, tol: f64) -> Result<StationaryResult<D>, StationaryError>
where
    D: DelayDistribution + Clone,
{
    let mean = check_delay(delay)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(StationaryError::InvalidTolerance(tol));
    }
    let quad_tol = (tol * 1e-2).max(1e-13);
    let gap = |l: f64| profile_integral(delay, l, quad_tol) - l;

    if let DelayLaw::PointMass(h) = delay.law() {
        // F(l) = h + l/2
        let l = 2.0 * h;
        return Ok(StationaryResult {
            l,
            residual: gap(l).abs(),
            iterations: 0,
            method: SolveMethod::ClosedForm,
            delay: delay.clone(),
        });
    }

    let (mut lo, mut hi) = (mean, 4.0 * mean);
    let (mut g_lo, mut g_hi) = (gap(lo), gap(hi));
    let mut widenings = 0;
    while !(g_lo > 0.0 && g_hi < 0.0) {
        if widenings == MAX_WIDENINGS {
            return Err(StationaryError::BracketFailure { lo, hi, g_lo, g_hi });
        }
        if g_lo <= 0.0 {
            lo *= 0.5;
            g_lo = gap(lo);
        }
        if g_hi >= 0.0 {
            hi *= 2.0;
            g_hi = gap(hi);
        }
        widenings += 1;
    }

    let sign_changes = (0..UNIQUENESS_SCAN)
        .map(|k| lo + (hi - lo) * k as f64 / (UNIQUENESS_SCAN - 1) as f64)
        .map(|l| {
            if l == lo {
                g_lo
            } else if l == hi {
                g_hi
            } else {
                gap(l)
            }
        })
        .collect::<Vec<_>>()
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    if sign_changes > 1 {
        return Err(StationaryError::MultipleRoots {
            count: sign_changes,
            lo,
            hi,
        });
    }

    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let l = 0.5 * (lo + hi);
    let residual = gap(l).abs();
    if residual >= tol {
        return Err(StationaryError::NotConverged { l, residual, tol });
    }
    Ok(StationaryResult {
        l,
        residual,
        iterations,
        method: SolveMethod::Bisection,
        delay: delay.clone(),
    })
}

/// Expected tip count `L = λ l`.
pub fn predict_tip_count<D>(delay: &D, lambda: f64, tol: f64) -> Result<f64, StationaryError>
where
    D: DelayDistribution + Clone,
{
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(StationaryError::InvalidLambda(lambda));
    }
    Ok(lambda * solve_stationary(delay, tol)?.l)
}

/// Right side minus left side of the uniform-delay equation
/// `l = h0 + (l/2) e^{−β²/l} + β ∫₀^β e^{−w²/l} dw` with `β = √(h1 − h0)`.
/// The Gaussian integral is evaluated through `erf`.
pub fn uniform_equation_gap(h0: f64, h1: f64, l: f64) -> f64 {
    let beta_sq = h1 - h0;
    let beta = beta_sq.sqrt();
    let gauss = 0.5 * (std::f64::consts::PI * l).sqrt() * erf(beta / l.sqrt());
    h0 + 0.5 * l * (-beta_sq / l).exp() + beta * gauss - l
}

/// Root of [`uniform_equation_gap`] by bisection on `[mean, 4 mean]`.
pub fn solve_uniform_equation(h0: f64, h1: f64, tol: f64) -> Result<f64, StationaryError> {
    let model = DelayModel::uniform(h0, h1)?;
    let mean = check_delay(&model)?;
    let (mut lo, mut hi) = (mean, 4.0 * mean);
    let (g_lo, g_hi) = (
        uniform_equation_gap(h0, h1, lo),
        uniform_equation_gap(h0, h1, hi),
    );
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(StationaryError::BracketFailure { lo, hi, g_lo, g_hi });
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if uniform_equation_gap(h0, h1, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
