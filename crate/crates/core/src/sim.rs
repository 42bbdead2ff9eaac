//! Discrete-event Monte Carlo simulation of tangle growth.
//!
//! Transactions arrive at rate λ. On arrival (the issue time `s`) a
//! transaction picks two tips uniformly with replacement from the current tip
//! set, then spends a random proof-of-work delay `H`. At `s + H` it attaches:
//! it becomes a tip and its two parents stop being tips, if they still were.
//! Parents stay selectable while the approval is pending.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delay::{DelayDistribution, DelayModel};
use crate::tips::{SiteId, TipSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {field} = {value} ({reason})")]
    InvalidConfig {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("tip set empty at t = {0}; genesis should always leave a tip")]
    EmptyTipSet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalProcess {
    #[default]
    Poisson,
    /// Arrivals at `n / λ`, n = 1, 2, ...
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub lambda: f64,
    pub delay: DelayModel,
    pub horizon: f64,
    #[serde(default)]
    pub arrival: ArrivalProcess,
    pub seed: u64,
    pub sample_interval: f64,
}

impl SimConfig {
    pub fn new(lambda: f64, delay: DelayModel, horizon: f64) -> Self {
        Self {
            lambda,
            delay,
            horizon,
            arrival: ArrivalProcess::Poisson,
            seed: 0,
            sample_interval: 1.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_arrival(mut self, arrival: ArrivalProcess) -> Self {
        self.arrival = arrival;
        self
    }

    pub fn with_sample_interval(mut self, dt: f64) -> Self {
        self.sample_interval = dt;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |field, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig {
                    field,
                    value,
                    reason: "must be finite and positive",
                })
            }
        };
        positive("lambda", self.lambda)?;
        positive("horizon", self.horizon)?;
        positive("sample_interval", self.sample_interval)?;
        Ok(())
    }

    /// Sample times `k * sample_interval` for every `k` with time <= horizon.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.horizon / self.sample_interval + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.sample_interval).collect()
    }
}

/// One ledger vertex and its tip lifecycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    /// When the transaction selected its parents.
    pub issue_time: f64,
    /// `issue_time` plus the sampled delay; the site is a tip from here on.
    pub attach_time: f64,
    /// `None` only for genesis.
    pub parents: Option<[SiteId; 2]>,
    /// First attachment of a child that approved this site.
    pub approved_time: Option<f64>,
}

impl Site {
    pub fn genesis() -> Self {
        Site {
            id: SiteId::GENESIS,
            issue_time: 0.0,
            attach_time: 0.0,
            parents: None,
            approved_time: None,
        }
    }

    /// The tip indicator: attached by `t` and not yet approved.
    pub fn is_tip_at(&self, t: f64) -> bool {
        self.attach_time <= t && self.approved_time.is_none_or(|a| a > t)
    }

    pub fn is_pending_at(&self, t: f64) -> bool {
        self.issue_time <= t && self.attach_time > t
    }

    pub fn is_approved_at(&self, t: f64) -> bool {
        self.approved_time.is_some_and(|a| a <= t)
    }
}

/// The full DAG produced by a run, plus the tip set at the horizon.
#[derive(Debug, Clone)]
pub struct Tangle {
    sites: Vec<Site>,
    tips: TipSet,
    horizon: f64,
}

impl Tangle {
    /// Builds a tangle from explicit sites. The tip set is recomputed from the
    /// lifecycles at `horizon`.
    pub fn from_sites(sites: Vec<Site>, horizon: f64) -> Self {
        let tips = sites
            .iter()
            .filter(|s| s.is_tip_at(horizon))
            .map(|s| s.id)
            .collect();
        Tangle {
            sites,
            tips,
            horizon,
        }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn sites_mut(&mut self) -> &mut [Site] {
        &mut self.sites
    }

    pub fn site(&self, id: SiteId) -> Option<&Site> {
        self.sites.get(id.0)
    }

    pub fn tips(&self) -> &TipSet {
        &self.tips
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Tip count at `t` recounted from site lifecycles.
    pub fn tip_count_at(&self, t: f64) -> usize {
        self.sites.iter().filter(|s| s.is_tip_at(t)).count()
    }

    pub fn summary(&self) -> TangleSummary {
        let t = self.horizon;
        TangleSummary {
            tips: self.tips.len(),
            approved: self.sites.iter().filter(|s| s.is_approved_at(t)).count(),
            pending: self.sites.iter().filter(|s| s.is_pending_at(t)).count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TangleSummary {
    pub tips: usize,
    pub approved: usize,
    pub pending: usize,
}

/// L(t) sampled on a regular grid from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrajectory {
    pub times: Vec<f64>,
    pub tip_counts: Vec<usize>,
    /// All sites including genesis and still-pending transactions.
    pub sites_issued: usize,
    pub summary: TangleSummary,
}

impl SimTrajectory {
    /// Average of L over the samples with `start <= t <= end`.
    pub fn time_average(&self, start: f64, end: f64) -> Option<f64> {
        let (sum, n) = self
            .times
            .iter()
            .zip(&self.tip_counts)
            .filter(|(&t, _)| t >= start && t <= end)
            .fold((0.0, 0usize), |(s, n), (_, &l)| (s + l as f64, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trajectory: SimTrajectory,
    pub tangle: Tangle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Attachment {
    time: f64,
    id: SiteId,
}

impl Eq for Attachment {}

impl Ord for Attachment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for Attachment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Arrivals {
    process: ArrivalProcess,
    lambda: f64,
    count: u64,
    last: f64,
}

impl Arrivals {
    fn next(&mut self, rng: &mut dyn RngCore) -> f64 {
        self.count += 1;
        self.last = match self.process {
            ArrivalProcess::Deterministic => self.count as f64 / self.lambda,
            ArrivalProcess::Poisson => {
                let u: f64 = rng.sample(Open01);
                self.last - u.ln() / self.lambda
            }
        };
        self.last
    }
}

/// Runs one simulation and keeps the resulting tangle.
pub fn simulate(config: &SimConfig) -> Result<SimOutcome, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let horizon = config.horizon;
    let sample_times = config.sample_times();

    let mut sites = vec![Site::genesis()];
    let mut tips = TipSet::new();
    tips.insert(SiteId::GENESIS);
    let mut pending: BinaryHeap<Reverse<Attachment>> = BinaryHeap::new();
    let mut arrivals = Arrivals {
        process: config.arrival,
        lambda: config.lambda,
        count: 0,
        last: 0.0,
    };

    let mut tip_counts = Vec::with_capacity(sample_times.len());
    let mut next_arrival = arrivals.next(&mut rng);

    loop {
        let next_attach = pending.peek().map(|r| r.0.time).unwrap_or(f64::INFINITY);
        // attachments win ties so a sample at t sees everything attached by t
        let event_time = next_attach.min(next_arrival);
        let done = event_time > horizon;
        let record_until = if done { horizon } else { event_time };
        while tip_counts.len() < sample_times.len() {
            let t = sample_times[tip_counts.len()];
            if t < record_until || (done && t <= horizon) {
                tip_counts.push(tips.len());
            } else {
                break;
            }
        }
        if done {
            break;
        }

        if next_attach <= next_arrival {
            let Reverse(att) = pending.pop().expect("peeked");
            let site = &sites[att.id.0];
            let [a, b] = site.parents.expect("only genesis lacks parents");
            for parent in [a, b] {
                if tips.remove(parent) {
                    sites[parent.0].approved_time = Some(att.time);
                }
            }
            tips.insert(att.id);
        } else {
            let issue_time = next_arrival;
            let (a, b) = tips
                .select_pair(&mut rng)
                .ok_or(SimError::EmptyTipSet(issue_time))?;
            let delay = config.delay.sample(&mut rng);
            let id = SiteId(sites.len());
            let attach_time = issue_time + delay;
            sites.push(Site {
                id,
                issue_time,
                attach_time,
                parents: Some([a, b]),
                approved_time: None,
            });
            pending.push(Reverse(Attachment {
                time: attach_time,
                id,
            }));
            next_arrival = arrivals.next(&mut rng);
        }
    }

    let tangle = Tangle {
        sites,
        tips,
        horizon,
    };
    let trajectory = SimTrajectory {
        times: sample_times,
        tip_counts,
        sites_issued: tangle.sites.len(),
        summary: tangle.summary(),
    };
    Ok(SimOutcome { trajectory, tangle })
}

/// Runs one simulation, returning only the sampled trajectory.
pub fn run(config: &SimConfig) -> Result<SimTrajectory, SimError> {
    simulate(config).map(|o| o.trajectory)
}
