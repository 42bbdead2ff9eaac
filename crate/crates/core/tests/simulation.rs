use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangle_fluid::{
    ensemble, run, simulate, validate_dag, ArrivalProcess, DelayModel, SimConfig, SiteId,
    StationaryWindow,
};

fn random_small_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let delay = match rng.random_range(0..3) {
        0 => DelayModel::fixed(rng.random_range(0.2..3.0)).unwrap(),
        1 => DelayModel::exponential(rng.random_range(0.3..3.0)).unwrap(),
        _ => {
            let h0 = rng.random_range(0.0..2.0);
            DelayModel::uniform(h0, h0 + rng.random_range(0.1..3.0)).unwrap()
        }
    };
    let arrival = if rng.random_bool(0.5) {
        ArrivalProcess::Poisson
    } else {
        ArrivalProcess::Deterministic
    };
    SimConfig::new(
        rng.random_range(1.0..5.0),
        delay,
        rng.random_range(5.0..50.0),
    )
    .with_seed(rng.random())
    .with_arrival(arrival)
    .with_sample_interval(rng.random_range(0.1..2.0))
}

#[test]
fn dag_validation_on_random_small_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDA6);
    for _ in 0..100 {
        let cfg = random_small_config(&mut rng);
        let out = simulate(&cfg).unwrap();
        let report = validate_dag(&out.tangle, Some(&out.trajectory));
        assert!(report.passed(), "{cfg:?}: {:?}", report.violation);
        assert!(out.trajectory.tip_counts.iter().all(|&l| l >= 1));
        assert!(out.trajectory.times.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn conservation_and_lifecycle_at_every_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let cfg = random_small_config(&mut rng);
        let out = simulate(&cfg).unwrap();
        for &t in &out.trajectory.times {
            let issued = out
                .tangle
                .sites()
                .iter()
                .filter(|s| s.issue_time <= t)
                .count();
            let tips = out.tangle.sites().iter().filter(|s| s.is_tip_at(t)).count();
            let approved = out
                .tangle
                .sites()
                .iter()
                .filter(|s| s.is_approved_at(t))
                .count();
            let pending = out
                .tangle
                .sites()
                .iter()
                .filter(|s| s.is_pending_at(t))
                .count();
            assert_eq!(issued, tips + approved + pending, "t={t}");
        }
        for s in out.tangle.sites() {
            // tip indicator switches on once at attachment and off once at approval
            if let Some(a) = s.approved_time {
                assert!(a >= s.attach_time);
                assert!(!s.is_tip_at(a));
                assert!(!s.is_tip_at(a + 1.0));
            }
            assert!(!s.is_tip_at(s.attach_time - 1e-9) || s.id == SiteId::GENESIS);
        }
    }
}

#[test]
fn repeat_runs_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let cfg = random_small_config(&mut rng);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn recount_oracle_matches_recorded_counts() {
    let cfg = SimConfig::new(20.0, DelayModel::uniform(1.0, 11.0).unwrap(), 60.0)
        .with_seed(31)
        .with_sample_interval(0.25);
    let out = simulate(&cfg).unwrap();
    for (&t, &l) in out.trajectory.times.iter().zip(&out.trajectory.tip_counts) {
        let recount = out
            .tangle
            .sites()
            .iter()
            .filter(|s| s.attach_time <= t && s.approved_time.is_none_or(|a| a > t))
            .count();
        assert_eq!(recount, l, "t={t}");
    }
}

#[test]
fn fixed_delay_tips_live_at_least_h() {
    let h = 5.0;
    let cfg = SimConfig::new(20.0, DelayModel::fixed(h).unwrap(), 100.0).with_seed(3);
    let out = simulate(&cfg).unwrap();
    let mut checked = 0;
    for s in out.tangle.sites() {
        if let Some(a) = s.approved_time {
            assert!(a - s.attach_time >= h - 1e-9, "{:?}", s);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn horizon_before_first_attachment_keeps_genesis_only() {
    for arrival in [ArrivalProcess::Poisson, ArrivalProcess::Deterministic] {
        let cfg = SimConfig::new(20.0, DelayModel::uniform(3.0, 4.0).unwrap(), 2.9)
            .with_arrival(arrival)
            .with_sample_interval(0.1);
        let traj = run(&cfg).unwrap();
        assert!(traj.tip_counts.iter().all(|&l| l == 1));
    }
}

/// Each issue picks from the tip set at its issue time. For the lowest-id
/// tip at that moment, inclusion has probability 2/L − 1/L².
#[test]
fn selection_law_inside_the_simulator() {
    let mut hits = 0.0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    for seed in 0..6 {
        let cfg = SimConfig::new(5.0, DelayModel::fixed(2.0).unwrap(), 200.0).with_seed(seed);
        let out = simulate(&cfg).unwrap();
        let sites = out.tangle.sites();
        for s in &sites[1..] {
            let tips: Vec<SiteId> = sites
                .iter()
                .filter(|c| c.is_tip_at(s.issue_time))
                .map(|c| c.id)
                .collect();
            let l = tips.len() as f64;
            let marked = tips[0];
            let p = 2.0 / l - 1.0 / (l * l);
            let [a, b] = s.parents.unwrap();
            if a == marked || b == marked {
                hits += 1.0;
            }
            expected += p;
            variance += p * (1.0 - p);
        }
    }
    let z = (hits - expected) / variance.sqrt();
    assert!(z.abs() < 3.0, "z = {z}");
}

#[test]
fn ensemble_mean_near_prediction_at_small_scale() {
    // λ h = 20 keeps this fast; prediction is 2 λ h = 40
    let cfg = SimConfig::new(10.0, DelayModel::fixed(2.0).unwrap(), 80.0).with_seed(8);
    let summary = ensemble(&cfg, 40, false).unwrap();
    let mean = summary
        .stationary_mean(StationaryWindow::second_half(80.0))
        .unwrap();
    assert!((mean - 40.0).abs() / 40.0 < 0.05, "{mean}");
}
