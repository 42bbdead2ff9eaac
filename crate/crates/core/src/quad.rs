//! Adaptive Simpson quadrature with Richardson correction.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Intervals are bisected until the two-panel and one-panel Simpson estimates
/// agree to `15 * tol` (step doubling), with the tolerance split between halves.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            evaluations: 0,
        };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evaluations = 3;
    let value = refine(
        &f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        MAX_DEPTH,
        &mut evaluations,
    );
    Quadrature { value, evaluations }
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evaluations: &mut usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || m <= a || b <= m {
        return left + right + delta / 15.0;
    }
    refine(
        f,
        a,
        m,
        fa,
        flm,
        fm,
        left,
        0.5 * tol,
        depth - 1,
        evaluations,
    ) + refine(
        f,
        m,
        b,
        fm,
        frm,
        fb,
        right,
        0.5 * tol,
        depth - 1,
        evaluations,
    )
}

/// Integrates over `[a, b]` splitting at the given interior points first.
pub fn adaptive_simpson_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cuts: &[f64],
    tol: f64,
) -> Quadrature {
    let mut edges = vec![a];
    edges.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let pieces = (edges.len() - 1) as f64;
    edges
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], tol / pieces))
        .fold(
            Quadrature {
                value: 0.0,
                evaluations: 0,
            },
            |acc, q| Quadrature {
                value: acc.value + q.value,
                evaluations: acc.evaluations + q.evaluations,
            },
        )
}
