//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangle_fluid::stationary::DEFAULT_TOLERANCE;
use tangle_fluid::{
    ensemble, run, simulate, solve_dde_fixed, solve_pde, solve_stationary, validate_dag,
    ArrivalProcess, DelayDistribution, DelayModel, FluidOptions, SimConfig, SiteId,
    StationaryWindow, TipSet,
};

const LAMBDA: f64 = 20.0;
const HORIZON: f64 = 300.0;
const RUNS: usize = 150;
const SEED: u64 = 2018;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn equilibrium(delay: DelayModel, target: f64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for arrival in [ArrivalProcess::Poisson, ArrivalProcess::Deterministic] {
        let cfg = SimConfig::new(LAMBDA, delay, HORIZON)
            .with_seed(SEED)
            .with_arrival(arrival);
        let summary = match ensemble(&cfg, RUNS, false) {
            Ok(s) => s,
            Err(e) => return Outcome::new(false, format!("{arrival:?}: {e}")),
        };
        let mean = summary
            .stationary_mean(StationaryWindow::second_half(HORIZON))
            .unwrap_or(f64::NAN);
        let ok = within_rel(mean, target, 0.05);
        pass &= ok;
        parts.push(format!(
            "{arrival:?} mean {mean:.2} ({:+.2}%)",
            100.0 * (mean - target) / target
        ));
    }
    Outcome::new(
        pass,
        format!("{delay}, target {target} ± 5%: {}", parts.join(", ")),
    )
}

fn c1() -> Outcome {
    equilibrium(DelayModel::fixed(5.0).unwrap(), 200.0)
}

fn c2() -> Outcome {
    equilibrium(DelayModel::exponential(0.2).unwrap(), 128.4)
}

fn c3() -> Outcome {
    equilibrium(DelayModel::uniform(1.0, 11.0).unwrap(), 213.8)
}

fn c4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for h in [0.1, 1.0, 5.0, 50.0] {
        let l = solve_stationary(&DelayModel::fixed(h).unwrap(), DEFAULT_TOLERANCE)
            .map(|r| r.l)
            .unwrap_or(f64::NAN);
        let err = (l - 2.0 * h).abs();
        pass &= err <= 1e-9;
        parts.push(format!("fixed({h}) err {err:.1e}"));
    }
    let exp = solve_stationary(&DelayModel::exponential(0.2).unwrap(), DEFAULT_TOLERANCE)
        .map(|r| r.l)
        .unwrap_or(f64::NAN);
    pass &= (exp - 1.2839 * 5.0).abs() <= 1e-3;
    parts.push(format!("exponential l {exp:.6} vs 6.4195"));
    let uni = solve_stationary(&DelayModel::uniform(1.0, 11.0).unwrap(), DEFAULT_TOLERANCE)
        .map(|r| r.l)
        .unwrap_or(f64::NAN);
    pass &= (uni - 10.69).abs() <= 1e-2;
    parts.push(format!("uniform l {uni:.6} vs 10.69"));
    Outcome::new(pass, parts.join(", "))
}

fn c5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [
        DelayModel::fixed(5.0).unwrap(),
        DelayModel::exponential(0.2).unwrap(),
        DelayModel::uniform(1.0, 11.0).unwrap(),
    ] {
        let stat = match solve_stationary(&d, DEFAULT_TOLERANCE) {
            Ok(r) => r.l,
            Err(e) => return Outcome::new(false, format!("{d}: {e}")),
        };
        let pde = match solve_pde(&d, &FluidOptions::new(0.01, 60.0 * d.mean())) {
            Ok(g) => g.final_l(),
            Err(e) => return Outcome::new(false, format!("{d}: {e}")),
        };
        let rel = (pde - stat).abs() / stat;
        pass &= rel < 0.01;
        parts.push(format!(
            "{d} pde {pde:.5} stat {stat:.5} ({:.3}%)",
            100.0 * rel
        ));
    }
    Outcome::new(
        pass,
        format!("Δ=0.01, horizon 60·mean: {}", parts.join(", ")),
    )
}

fn c6() -> Outcome {
    let step = 0.01;
    let opts = FluidOptions::new(step, HORIZON);
    let (pde, dde) = match (
        solve_pde(&DelayModel::fixed(5.0).unwrap(), &opts),
        solve_dde_fixed(5.0, &opts),
    ) {
        (Ok(p), Ok(d)) => (p, d),
        (Err(e), _) | (_, Err(e)) => return Outcome::new(false, e.to_string()),
    };
    let start = (5.0 / step).round() as usize;
    let sup = (start..pde.l.len().min(dde.l.len()))
        .map(|n| (pde.l[n] - dde.l[n]).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        sup < 0.05,
        format!("h=5, Δ=0.01: sup |l_pde − l_dde| on [5,300] = {sup:.3e} (limit 0.05)"),
    )
}

fn c7() -> Outcome {
    let tips: TipSet = (0..10).map(SiteId).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let trials = 1_000_000;
    let mut counts = [0u64; 10];
    for _ in 0..trials {
        let (a, b) = tips.select_pair(&mut rng).unwrap();
        counts[a.index()] += 1;
        if b != a {
            counts[b.index()] += 1;
        }
    }
    let p = 0.19;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    let freq = counts[0] as f64 / trials as f64;
    let z = (freq - p) / se;
    let worst = counts
        .iter()
        .map(|&c| ((c as f64 / trials as f64 - p) / se).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        z.abs() < 3.0,
        format!(
            "L=10, 10^6 selections: tip #0 frequency {freq:.5} (z = {z:+.2}), \
             largest |z| over all tips {worst:.2}"
        ),
    )
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut sites = 0;
    for k in 0..100 {
        let delay = match k % 3 {
            0 => DelayModel::fixed(rng.random_range(0.2..3.0)).unwrap(),
            1 => DelayModel::exponential(rng.random_range(0.3..3.0)).unwrap(),
            _ => {
                let h0 = rng.random_range(0.0..2.0);
                DelayModel::uniform(h0, h0 + rng.random_range(0.1..3.0)).unwrap()
            }
        };
        let arrival = if k % 2 == 0 {
            ArrivalProcess::Poisson
        } else {
            ArrivalProcess::Deterministic
        };
        let cfg = SimConfig::new(
            rng.random_range(1.0..5.0),
            delay,
            rng.random_range(5.0..50.0),
        )
        .with_seed(rng.random())
        .with_arrival(arrival)
        .with_sample_interval(0.5);
        let out = match simulate(&cfg) {
            Ok(o) => o,
            Err(e) => return Outcome::new(false, format!("config {k}: {e}")),
        };
        // validate_dag recounts the tip set independently at every sample
        let report = validate_dag(&out.tangle, Some(&out.trajectory));
        if let Some(v) = report.violation {
            return Outcome::new(false, format!("config {k} ({cfg:?}): {v}"));
        }
        for &t in &out.trajectory.times {
            let s = out.tangle.sites();
            let issued = s.iter().filter(|x| x.issue_time <= t).count();
            let split = s.iter().filter(|x| x.is_tip_at(t)).count()
                + s.iter().filter(|x| x.is_approved_at(t)).count()
                + s.iter().filter(|x| x.is_pending_at(t)).count();
            if issued != split {
                return Outcome::new(false, format!("config {k}: conservation broken at t={t}"));
            }
        }
        if run(&cfg).ok().as_ref() != Some(&out.trajectory) {
            return Outcome::new(false, format!("config {k}: repeat run differs"));
        }
        sites += out.tangle.sites().len();
    }

    let step = 0.01;
    let grid = match solve_pde(
        &DelayModel::fixed(5.0).unwrap(),
        &FluidOptions::new(step, 20.0),
    ) {
        Ok(g) => g,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let early = (0..(5.0 / step) as usize)
        .map(|n| (grid.l[n] - n as f64 * step).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        early <= step,
        format!(
            "100 random configs ({sites} sites) valid, conserved, reproducible; \
             fluid max |l(t) − t| on [0,5) = {early:.2e} (Δ = {step})"
        ),
    )
}

fn c9() -> Outcome {
    let d = DelayModel::fixed(5.0).unwrap();
    let err = |step: f64| {
        solve_pde(&d, &FluidOptions::new(step, HORIZON)).map(|g| (g.final_l() - 10.0).abs())
    };
    match (err(0.01), err(0.005)) {
        (Ok(coarse), Ok(fine)) => {
            let ratio = coarse / fine;
            Outcome::new(
                (1.7..=2.3).contains(&ratio),
                format!(
                    "Fixed(5): |l(300) − 10| = {coarse:.3e} at Δ=0.01, {fine:.3e} at Δ=0.005, \
                     ratio {ratio:.3} (required [1.7, 2.3])"
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("C1 fixed-delay equilibrium", c1),
        ("C2 exponential-delay equilibrium", c2),
        ("C3 uniform-delay equilibrium", c3),
        ("C4 stationary solver exactness", c4),
        ("C5 fluid dynamics reach stationarity", c5),
        ("C6 PDE/DDE equivalence", c6),
        ("C7 selection-probability law", c7),
        ("C8 property suites", c8),
        ("C9 first-order convergence", c9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
