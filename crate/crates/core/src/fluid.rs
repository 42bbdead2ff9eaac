//! Fluid-limit solvers for the rescaled tip count.
//!
//! The tip-age density `g(t, v)` obeys
//!
//! ```text
//! ∂g/∂t + ∂g/∂v = −g(t, v) K(t, v),    K(t, v) = E_H[1{H <= v} 2 / l(t − H)]
//! l(t) = ∫₀ᵗ g(t, v) dv,               g(t, 0) = 1
//! ```
//!
//! [`solve_pde`] integrates along characteristics on a grid with equal time
//! and age steps, so each grid value moves exactly one cell per step:
//! `g[n+1][i+1] = g[n][i] · exp(−Δ K(nΔ, iΔ))`. [`solve_dde_fixed`] integrates
//! the equivalent delay equation for a fixed delay `h`,
//! `dl/dt = 1 − (2 / l(t − h)) x(t − h)`, where `x` counts free tips.
//!
//! Inside the kernel `l` is floored at `max(Δ, 1/λ_ref)`: the unscaled system
//! always has at least one tip, and the floor only binds while `l` is still
//! growing from zero.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{DelayDistribution, DelayLaw};

pub const DEFAULT_LAMBDA_REF: f64 = 20.0;

/// The age axis is cut at this many mean delays (or the horizon if shorter).
pub const AGE_CAP_IN_MEANS: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("step must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("step {step} exceeds the mean delay {mean}; the delay would not be resolved")]
    StepTooLarge { step: f64, mean: f64 },
    #[error("horizon must be finite and positive, got {0}")]
    InvalidHorizon(f64),
    #[error("lambda_ref must be finite and positive, got {0}")]
    InvalidLambdaRef(f64),
    #[error("non-finite l at step {step_index} (t = {time}) with step {step} and delay {delay}")]
    NonFinite {
        step_index: usize,
        time: f64,
        step: f64,
        delay: String,
    },
    #[error("l history has no value at t = {0}")]
    HistoryGap(f64),
    #[error("kernel needs a finite age or a bounded delay support")]
    UnboundedKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidOptions {
    pub step: f64,
    pub horizon: f64,
    #[serde(default = "default_lambda_ref")]
    pub lambda_ref: f64,
    /// Keep every `k`-th row of `g`. The final row is always kept.
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

fn default_lambda_ref() -> f64 {
    DEFAULT_LAMBDA_REF
}

impl FluidOptions {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            lambda_ref: DEFAULT_LAMBDA_REF,
            snapshot_stride: None,
        }
    }

    pub fn with_lambda_ref(mut self, lambda_ref: f64) -> Self {
        self.lambda_ref = lambda_ref;
        self
    }

    pub fn with_snapshots(mut self, stride: usize) -> Self {
        self.snapshot_stride = Some(stride.max(1));
        self
    }

    pub fn l_floor(&self) -> f64 {
        self.step.max(1.0 / self.lambda_ref)
    }

    fn validate(&self, mean_delay: f64) -> Result<Vec<String>, FluidError> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(FluidError::InvalidStep(self.step));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(FluidError::InvalidHorizon(self.horizon));
        }
        if !(self.lambda_ref.is_finite() && self.lambda_ref > 0.0) {
            return Err(FluidError::InvalidLambdaRef(self.lambda_ref));
        }
        if self.step > mean_delay {
            return Err(FluidError::StepTooLarge {
                step: self.step,
                mean: mean_delay,
            });
        }
        let mut warnings = Vec::new();
        if self.horizon < mean_delay {
            let msg = format!(
                "horizon {} is shorter than the mean delay {mean_delay}; l(t) will not be stationary",
                self.horizon
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }

    fn steps(&self) -> usize {
        (self.horizon / self.step).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSnapshot {
    pub step_index: usize,
    pub time: f64,
    /// `g` at ages `0, Δ, 2Δ, ...`
    pub g: Vec<f64>,
}

/// Output of [`solve_pde`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidGrid {
    pub step: f64,
    /// `l[n] ≈ l(nΔ)`
    pub l: Vec<f64>,
    /// Density row at the final time.
    pub g_final: Vec<f64>,
    pub snapshots: Vec<GridSnapshot>,
    /// Highest age index kept on the grid.
    pub age_cap: usize,
    pub l_floor: f64,
    pub warnings: Vec<String>,
}

impl FluidGrid {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.l.len()).map(move |n| n as f64 * self.step)
    }

    pub fn final_time(&self) -> f64 {
        (self.l.len() - 1) as f64 * self.step
    }

    pub fn final_l(&self) -> f64 {
        *self.l.last().expect("l(0) is always stored")
    }

    /// `l` at time `t`, linearly interpolated.
    pub fn l_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.l, self.step, t)
    }
}

/// Grid position of `time`, snapped to the nearest node when within rounding.
fn grid_position(time: f64, step: f64) -> f64 {
    let pos = time / step;
    let r = pos.round();
    if (pos - r).abs() < 1e-9 {
        r
    } else {
        pos
    }
}

fn interpolate(values: &[f64], step: f64, time: f64) -> Option<f64> {
    let pos = grid_position(time, step);
    if pos < 0.0 || values.is_empty() {
        return None;
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 {
        return values.get(i).copied();
    }
    let (a, b) = (values.get(i)?, values.get(i + 1)?);
    Some(a + frac * (b - a))
}

/// `v >= h` on the grid, tolerant of rounding in `i · Δ`.
fn age_reached(v: f64, h: f64, step: f64) -> bool {
    v >= h - 1e-9 * step
}

/// Trapezoid of `2 f(x) / l(t − x)` over one quadrature cell `[a, b]`
/// clipped to the delay support, with `l` linear across the cell.
fn cell_weight<D: DelayDistribution + ?Sized>(
    delay: &D,
    a: f64,
    b: f64,
    l_a: f64,
    l_b: f64,
) -> f64 {
    let (lo, hi) = delay.support();
    let p = a.max(lo);
    let q = b.min(hi);
    if q <= p {
        return 0.0;
    }
    let slope = (l_b - l_a) / (b - a);
    let l_p = l_a + slope * (p - a);
    let l_q = l_a + slope * (q - a);
    (q - p) * (delay.pdf(p) / l_p + delay.pdf(q) / l_q)
}

/// Evaluates `K(t, v) = E_H[1{H <= v} 2 / l(t − H)]`.
///
/// `l_history` maps a time to `l` at that time and returns `None` outside
/// the stored range. Point masses use one lookup; densities use a composite
/// trapezoid with node spacing `step` on the support clipped to `[0, v]`.
pub fn kernel_eval<D, F>(
    delay: &D,
    v: f64,
    t: f64,
    step: f64,
    l_history: F,
) -> Result<f64, FluidError>
where
    D: DelayDistribution + ?Sized,
    F: Fn(f64) -> Option<f64>,
{
    if !(step.is_finite() && step > 0.0) {
        return Err(FluidError::InvalidStep(step));
    }
    let lookup = |time: f64| l_history(time).ok_or(FluidError::HistoryGap(time));
    let (lo, hi) = delay.support();
    match delay.law() {
        DelayLaw::PointMass(h) => {
            if !age_reached(v, h, step) {
                return Ok(0.0);
            }
            Ok(2.0 / lookup(t - h)?)
        }
        DelayLaw::Density => {
            if v < lo {
                return Ok(0.0);
            }
            let upper = v.min(hi);
            if !upper.is_finite() {
                return Err(FluidError::UnboundedKernel);
            }
            let first = (lo / step).floor() as usize;
            let mut total = 0.0;
            let mut j = first;
            loop {
                let a = j as f64 * step;
                if a >= upper {
                    break;
                }
                let b = ((j + 1) as f64 * step).min(upper);
                total += cell_weight(delay, a, b, lookup(t - a)?, lookup(t - b)?);
                j += 1;
            }
            Ok(total)
        }
    }
}

/// Integrates the fluid PDE from the empty start `g(0, v) = 0` for `v > 0`.
pub fn solve_pde<D>(delay: &D, options: &FluidOptions) -> Result<FluidGrid, FluidError>
where
    D: DelayDistribution + ?Sized,
{
    let mean = delay.mean();
    let warnings = options.validate(mean)?;
    let step = options.step;
    let floor = options.l_floor();
    let n_steps = options.steps();
    let age_cap = ((AGE_CAP_IN_MEANS * mean).min(options.horizon) / step).ceil() as usize;
    let age_cap = age_cap.max(1);

    let mut l = Vec::with_capacity(n_steps + 1);
    // 1 / max(l, floor), the only form the kernel needs
    let mut inv_l = Vec::with_capacity(n_steps + 1);
    l.push(0.0);
    inv_l.push(1.0 / floor);

    let mut g = vec![0.0; age_cap + 1];
    g[0] = 1.0;
    let mut top = 0usize;

    let mut snapshots = Vec::new();
    let snapshot_every = options.snapshot_stride;
    let keep = |n: usize, g: &[f64], snapshots: &mut Vec<GridSnapshot>| {
        if snapshot_every.is_some_and(|k| n.is_multiple_of(k)) {
            snapshots.push(GridSnapshot {
                step_index: n,
                time: n as f64 * step,
                g: g.to_vec(),
            });
        }
    };
    keep(0, &g[..=top], &mut snapshots);

    let plan = KernelPlan::new(delay, step, floor, age_cap);
    let mut decay = vec![1.0; age_cap];

    for n in 0..n_steps {
        let t = n as f64 * step;
        // rows advanced this step; the last cell falls off the age cap
        let last = top.min(age_cap - 1);
        plan.decay_factors(delay, n, &l, &inv_l, &mut decay[..=last]);
        for i in (0..=last).rev() {
            g[i + 1] = g[i] * decay[i];
        }
        g[0] = 1.0;
        top = last + 1;

        let row = &g[..=top];
        let sum: f64 = row.iter().sum();
        let next_l = step * (sum - 0.5 * (row[0] + row[top]));
        if !next_l.is_finite() {
            return Err(FluidError::NonFinite {
                step_index: n + 1,
                time: t + step,
                step,
                delay: format!("{delay:?}"),
            });
        }
        l.push(next_l);
        inv_l.push(1.0 / next_l.max(floor));
        keep(n + 1, row, &mut snapshots);
    }

    if snapshots.last().is_none_or(|s| s.step_index != n_steps) && snapshot_every.is_some() {
        snapshots.push(GridSnapshot {
            step_index: n_steps,
            time: n_steps as f64 * step,
            g: g[..=top].to_vec(),
        });
    }

    Ok(FluidGrid {
        step,
        l,
        g_final: g[..=top].to_vec(),
        snapshots,
        age_cap,
        l_floor: floor,
        warnings,
    })
}

/// Precomputed pieces of the kernel sweep.
struct KernelPlan {
    step: f64,
    floor: f64,
    shape: PlanShape,
}

enum PlanShape {
    PointMass {
        h: f64,
        /// First age index with `v >= h`.
        onset: usize,
    },
    Density {
        /// `pdf(jΔ)` at nodes inside the support, `None` outside.
        node_pdf: Vec<Option<f64>>,
        /// Index of the first cell that lies wholly past the support.
        past_support: usize,
    },
}

impl KernelPlan {
    fn new<D: DelayDistribution + ?Sized>(
        delay: &D,
        step: f64,
        floor: f64,
        age_cap: usize,
    ) -> Self {
        let shape = match delay.law() {
            DelayLaw::PointMass(h) => {
                let onset = (0..=age_cap + 1)
                    .find(|&i| age_reached(i as f64 * step, h, step))
                    .unwrap_or(age_cap + 1);
                PlanShape::PointMass { h, onset }
            }
            DelayLaw::Density => {
                let (lo, hi) = delay.support();
                let node_pdf = (0..=age_cap + 1)
                    .map(|j| {
                        let x = j as f64 * step;
                        (x >= lo && x <= hi).then(|| delay.pdf(x))
                    })
                    .collect();
                let past_support = if hi.is_finite() {
                    (hi / step).ceil() as usize
                } else {
                    usize::MAX
                };
                PlanShape::Density {
                    node_pdf,
                    past_support,
                }
            }
        };
        KernelPlan { step, floor, shape }
    }

    /// Fills `out[i] = exp(−Δ K(nΔ, iΔ))` for every age index in `out`.
    /// `l` and `inv_l` hold the history up to and including step `n`.
    fn decay_factors<D: DelayDistribution + ?Sized>(
        &self,
        delay: &D,
        n: usize,
        l: &[f64],
        inv_l: &[f64],
        out: &mut [f64],
    ) {
        let step = self.step;
        let t = n as f64 * step;
        match self.shape {
            PlanShape::PointMass { h, onset } => {
                if onset >= out.len() {
                    out.fill(1.0);
                    return;
                }
                let lagged = interpolate(l, step, t - h).unwrap_or(0.0).max(self.floor);
                let factor = (-step * 2.0 / lagged).exp();
                out[..onset].fill(1.0);
                out[onset..].fill(factor);
            }
            PlanShape::Density {
                ref node_pdf,
                past_support,
            } => {
                let mut k = 0.0;
                let mut constant_from = None;
                for i in 0..out.len() {
                    out[i] = if k == 0.0 { 1.0 } else { (-step * k).exp() };
                    if i + 1 == out.len() {
                        break;
                    }
                    if i >= past_support {
                        constant_from = Some(i + 1);
                        break;
                    }
                    // cell [iΔ, (i+1)Δ] looks back to times t − iΔ and t − (i+1)Δ
                    k += match (node_pdf[i], node_pdf[i + 1]) {
                        (Some(fa), Some(fb)) => step * (fa * inv_l[n - i] + fb * inv_l[n - i - 1]),
                        (None, None) if !support_edge_inside(delay, i, step) => 0.0,
                        _ => {
                            let la = l[n - i].max(self.floor);
                            let lb = l[n - i - 1].max(self.floor);
                            cell_weight(delay, i as f64 * step, (i + 1) as f64 * step, la, lb)
                        }
                    };
                }
                if let Some(from) = constant_from {
                    let factor = if k == 0.0 { 1.0 } else { (-step * k).exp() };
                    out[from..].fill(factor);
                }
            }
        }
    }
}

/// Whether the support starts or ends strictly inside cell `i`.
fn support_edge_inside<D: DelayDistribution + ?Sized>(delay: &D, i: usize, step: f64) -> bool {
    let (lo, hi) = delay.support();
    let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
    (lo > a && lo < b) || (hi > a && hi < b)
}

/// Output of [`solve_dde_fixed`]: `l[n] ≈ l(nΔ)` and free tips `x[n] ≈ x(nΔ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdeState {
    pub step: f64,
    pub delay: f64,
    pub l: Vec<f64>,
    pub x: Vec<f64>,
    pub l_floor: f64,
}

impl DdeState {
    pub fn final_l(&self) -> f64 {
        *self.l.last().expect("l(0) is always stored")
    }

    pub fn l_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.l, self.step, t)
    }

    /// Mass of tips selected at least once by time `s`; zero before the start.
    fn selected_by(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        s - interpolate(&self.x, self.step, s).expect("history covers s")
    }
}

/// Integrates the fixed-delay equation
/// `dl/dt = 1` for `t < h`, `dl/dt = 1 − (2 / l(t − h)) x(t − h)` after,
/// together with the free-tip balance `dx/dt = 1 − (2 / l) x`.
///
/// `x` is advanced with the exact solution for `l` frozen over the step. The
/// `l` update uses the increment of the selected mass `s − x(s)` over the
/// delayed step, so `l(t) = h + x(t − h)` holds exactly for `t >= h`.
pub fn solve_dde_fixed(h: f64, options: &FluidOptions) -> Result<DdeState, FluidError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(FluidError::InvalidStep(h));
    }
    options.validate(h)?;
    let step = options.step;
    let floor = options.l_floor();
    let n_steps = options.steps();

    let mut state = DdeState {
        step,
        delay: h,
        l: Vec::with_capacity(n_steps + 1),
        x: Vec::with_capacity(n_steps + 1),
        l_floor: floor,
    };
    state.l.push(0.0);
    state.x.push(0.0);

    for n in 0..n_steps {
        let t = n as f64 * step;
        let (l_n, x_n) = (state.l[n], state.x[n]);
        let lf = l_n.max(floor);
        let keep = (-2.0 * step / lf).exp();
        let x_next = x_n * keep + 0.5 * lf * (1.0 - keep);

        let approved = state.selected_by(t + step - h) - state.selected_by(t - h);
        let l_next = l_n + step - approved;
        if !(l_next.is_finite() && x_next.is_finite()) {
            return Err(FluidError::NonFinite {
                step_index: n + 1,
                time: t + step,
                step,
                delay: format!("fixed(h={h})"),
            });
        }
        state.l.push(l_next);
        state.x.push(x_next);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelayModel;

    fn fixed(h: f64) -> DelayModel {
        DelayModel::fixed(h).unwrap()
    }

    #[test]
    fn step_larger_than_mean_refused() {
        let err = solve_pde(&fixed(0.5), &FluidOptions::new(1.0, 10.0)).unwrap_err();
        assert!(matches!(err, FluidError::StepTooLarge { .. }));
        assert!(solve_pde(&fixed(5.0), &FluidOptions::new(0.0, 10.0)).is_err());
        assert!(solve_pde(&fixed(5.0), &FluidOptions::new(0.1, f64::NAN)).is_err());
    }

    #[test]
    fn short_horizon_warns() {
        let grid = solve_pde(&fixed(5.0), &FluidOptions::new(0.1, 2.0)).unwrap();
        assert_eq!(grid.warnings.len(), 1);
    }

    #[test]
    fn early_growth_is_linear() {
        let grid = solve_pde(&fixed(5.0), &FluidOptions::new(0.01, 10.0)).unwrap();
        for (n, t) in grid.times().enumerate().take(500) {
            assert!((grid.l[n] - t).abs() < 1e-9, "t={t} l={}", grid.l[n]);
        }
    }

    #[test]
    fn boundary_and_bounds_hold() {
        let opts = FluidOptions::new(0.05, 40.0).with_snapshots(1);
        for d in [
            fixed(2.0),
            DelayModel::exponential(0.5).unwrap(),
            DelayModel::uniform(0.5, 3.5).unwrap(),
        ] {
            let grid = solve_pde(&d, &opts).unwrap();
            for snap in &grid.snapshots {
                assert_eq!(snap.g[0], 1.0);
                assert!(snap.g.iter().all(|&g| (0.0..=1.0).contains(&g)));
            }
            for pair in grid.snapshots.windows(2) {
                let (prev, next) = (&pair[0].g, &pair[1].g);
                for i in 0..prev.len().min(next.len() - 1) {
                    assert!(next[i + 1] <= prev[i], "{d}: decay violated at i={i}");
                }
            }
            for snap in &grid.snapshots {
                let m = snap.g.len() - 1;
                let trap = if m == 0 {
                    0.0
                } else {
                    opts.step * (snap.g.iter().sum::<f64>() - 0.5 * (snap.g[0] + snap.g[m]))
                };
                assert!((grid.l[snap.step_index] - trap).abs() < opts.step);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let flat = |value: f64| move |_t: f64| Some(value);
        let f5 = fixed(5.0);
        assert_eq!(kernel_eval(&f5, 4.0, 20.0, 0.01, flat(10.0)).unwrap(), 0.0);
        assert!((kernel_eval(&f5, 7.0, 20.0, 0.01, flat(10.0)).unwrap() - 0.2).abs() < 1e-15);

        let uni = DelayModel::uniform(1.0, 11.0).unwrap();
        assert_eq!(
            kernel_eval(&uni, 0.5, 20.0, 0.01, flat(10.69)).unwrap(),
            0.0
        );
        let full = kernel_eval(&uni, f64::INFINITY, 20.0, 0.01, flat(10.69)).unwrap();
        assert!((full - 0.187_090_739_008_419).abs() < 1e-12, "{full}");

        let exp = DelayModel::exponential(0.2).unwrap();
        assert_eq!(
            kernel_eval(&exp, f64::INFINITY, 20.0, 0.01, flat(1.0)),
            Err(FluidError::UnboundedKernel)
        );
        // trapezoid of 2 f / 10 over [0, 5] against 2 (1 - e^{-1}) / 10
        let k = kernel_eval(&exp, 5.0, 20.0, 0.01, flat(10.0)).unwrap();
        assert!((k - 0.2 * 0.632_120_558_828_557_7).abs() < 1e-6);
    }

    #[test]
    fn kernel_reports_history_gap() {
        let short = |t: f64| (t >= 10.0).then_some(5.0);
        let err = kernel_eval(&fixed(5.0), 6.0, 12.0, 0.1, short).unwrap_err();
        assert!(matches!(err, FluidError::HistoryGap(_)));
    }

    #[test]
    fn kernel_with_unaligned_support() {
        // support edges fall inside cells; against constant l the clipped
        // trapezoid is exact
        let uni = DelayModel::uniform(0.33, 2.77).unwrap();
        let k = kernel_eval(&uni, 1.5, 5.0, 0.1, |_| Some(4.0)).unwrap();
        let exact = 2.0 / 4.0 * uni.cdf_unchecked(1.5);
        assert!((k - exact).abs() < 1e-12, "{k} vs {exact}");
    }

    #[test]
    fn dde_early_growth_and_free_tips() {
        let dde = solve_dde_fixed(5.0, &FluidOptions::new(0.01, 60.0)).unwrap();
        for n in 0..=500 {
            assert!((dde.l[n] - n as f64 * 0.01).abs() < 1e-9);
        }
        for (l, x) in dde.l.iter().zip(&dde.x) {
            assert!(x <= l, "x {x} > l {l}");
        }
        // l(t) = h + x(t - h) once t >= h
        for n in 500..dde.l.len() {
            assert!((dde.l[n] - 5.0 - dde.x[n - 500]).abs() < 1e-9);
        }
    }

    #[test]
    fn dde_accepts_unaligned_delay() {
        let dde = solve_dde_fixed(1.234, &FluidOptions::new(0.01, 80.0)).unwrap();
        assert!((dde.final_l() - 2.468).abs() < 1e-2);
    }
}
