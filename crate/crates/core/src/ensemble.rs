//! Independent replicate runs and pointwise statistics of L(t).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::{run, SimConfig, SimError, SimTrajectory};

/// Time window `[start, end]` over which a stationary average is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryWindow {
    pub start: f64,
    pub end: f64,
}

impl StationaryWindow {
    pub fn second_half(horizon: f64) -> Self {
        Self {
            start: 0.5 * horizon,
            end: horizon,
        }
    }
}

/// Seed of replicate `index`, a SplitMix64 finalizer over the base seed and
/// the index so nearby bases do not give overlapping streams.
pub fn derive_seed(base: u64, index: usize) -> u64 {
    let mut z = base
        ^ (index as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation across runs; zero for a single run.
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Per-run averages of L over the default stationary window.
    pub run_averages: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<SimTrajectory>>,
}

impl EnsembleSummary {
    pub fn n_runs(&self) -> usize {
        self.seeds.len()
    }

    /// Time average of the ensemble mean over `window`.
    pub fn stationary_mean(&self, window: StationaryWindow) -> Option<f64> {
        let picked: Vec<f64> = self
            .times
            .iter()
            .zip(&self.mean)
            .filter(|(&t, _)| t >= window.start && t <= window.end)
            .map(|(_, &m)| m)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }

    /// Spread of the per-run window averages around their mean.
    pub fn stationary_std(&self) -> f64 {
        sample_std(&self.run_averages)
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("at least the t = 0 sample")
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Runs `n_runs` replicates in parallel. Replicate `k` uses
/// `derive_seed(config.seed, k)`, so results do not depend on thread count.
pub fn ensemble(
    config: &SimConfig,
    n_runs: usize,
    keep_runs: bool,
) -> Result<EnsembleSummary, SimError> {
    config.validate()?;
    if n_runs == 0 {
        return Err(SimError::InvalidConfig {
            field: "n_runs",
            value: 0.0,
            reason: "need at least one run",
        });
    }
    let seeds: Vec<u64> = (0..n_runs).map(|k| derive_seed(config.seed, k)).collect();
    let runs: Vec<SimTrajectory> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = config.clone();
            cfg.seed = seed;
            run(&cfg)
        })
        .collect::<Result<_, _>>()?;

    let times = runs[0].times.clone();
    let n = runs.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut std = Vec::with_capacity(times.len());
    let mut min = Vec::with_capacity(times.len());
    let mut max = Vec::with_capacity(times.len());
    let mut column = Vec::with_capacity(runs.len());
    for k in 0..times.len() {
        column.clear();
        column.extend(runs.iter().map(|r| r.tip_counts[k] as f64));
        mean.push(column.iter().sum::<f64>() / n);
        std.push(sample_std(&column));
        min.push(column.iter().copied().fold(f64::INFINITY, f64::min));
        max.push(column.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    let window = StationaryWindow::second_half(config.horizon);
    let run_averages = runs
        .iter()
        .map(|r| r.time_average(window.start, window.end).unwrap_or(f64::NAN))
        .collect();

    Ok(EnsembleSummary {
        times,
        mean,
        std,
        min,
        max,
        seeds,
        run_averages,
        runs: keep_runs.then_some(runs),
    })
}
