//! Structural checks on a finished tangle.
//!
//! Every check runs independently of how the simulator built the graph:
//! acyclicity uses Kahn's algorithm rather than the id order, and tip counts
//! are recounted from the site lifecycles.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::sim::{SimTrajectory, Tangle};
use crate::tips::SiteId;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MisplacedId {
        position: usize,
        id: SiteId,
    },
    MissingGenesis,
    GenesisHasParents,
    MissingParents {
        site: SiteId,
    },
    UnknownParent {
        site: SiteId,
        parent: SiteId,
    },
    ParentOrder {
        site: SiteId,
        parent: SiteId,
    },
    AttachOrder {
        site: SiteId,
        parent: SiteId,
    },
    AttachBeforeIssue {
        site: SiteId,
    },
    ApprovedBeforeAttach {
        site: SiteId,
    },
    Cycle {
        remaining: usize,
    },
    Unreachable {
        site: SiteId,
    },
    TipSetMismatch {
        recorded: usize,
        recounted: usize,
    },
    TipCountMismatch {
        time: f64,
        recorded: usize,
        recounted: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MisplacedId { position, id } => {
                write!(f, "site {id} stored at position {position}")
            }
            Violation::MissingGenesis => write!(f, "tangle has no genesis"),
            Violation::GenesisHasParents => write!(f, "genesis has parents"),
            Violation::MissingParents { site } => write!(f, "site {site} has no parents"),
            Violation::UnknownParent { site, parent } => {
                write!(f, "site {site} references unknown parent {parent}")
            }
            Violation::ParentOrder { site, parent } => {
                write!(f, "site {site} approves later site {parent}")
            }
            Violation::AttachOrder { site, parent } => {
                write!(f, "site {site} attached no later than its parent {parent}")
            }
            Violation::AttachBeforeIssue { site } => {
                write!(f, "site {site} attached before it was issued")
            }
            Violation::ApprovedBeforeAttach { site } => {
                write!(f, "site {site} approved before it attached")
            }
            Violation::Cycle { remaining } => {
                write!(f, "directed cycle: {remaining} sites cannot be ordered")
            }
            Violation::Unreachable { site } => {
                write!(f, "site {site} does not reach genesis")
            }
            Violation::TipSetMismatch {
                recorded,
                recounted,
            } => write!(
                f,
                "final tip set has {recorded} tips, lifecycles give {recounted}"
            ),
            Violation::TipCountMismatch {
                time,
                recorded,
                recounted,
            } => write!(f, "L({time}) recorded {recorded}, recounted {recounted}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DagReport {
    pub sites_checked: usize,
    pub samples_checked: usize,
    /// First violation found, if any.
    pub violation: Option<Violation>,
}

impl DagReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Validates the tangle, and the recorded trajectory against it if given.
pub fn validate_dag(tangle: &Tangle, trajectory: Option<&SimTrajectory>) -> DagReport {
    let mut report = DagReport {
        sites_checked: tangle.sites().len(),
        samples_checked: trajectory.map_or(0, |t| t.times.len()),
        violation: None,
    };
    report.violation = first_violation(tangle, trajectory);
    report
}

fn first_violation(tangle: &Tangle, trajectory: Option<&SimTrajectory>) -> Option<Violation> {
    let sites = tangle.sites();
    let Some(genesis) = sites.first() else {
        return Some(Violation::MissingGenesis);
    };
    if genesis.id != SiteId::GENESIS {
        return Some(Violation::MissingGenesis);
    }
    if genesis.parents.is_some() {
        return Some(Violation::GenesisHasParents);
    }

    for (position, site) in sites.iter().enumerate() {
        if site.id.0 != position {
            return Some(Violation::MisplacedId {
                position,
                id: site.id,
            });
        }
        if site.attach_time < site.issue_time {
            return Some(Violation::AttachBeforeIssue { site: site.id });
        }
        if site.approved_time.is_some_and(|a| a < site.attach_time) {
            return Some(Violation::ApprovedBeforeAttach { site: site.id });
        }
        if position == 0 {
            continue;
        }
        let Some(parents) = site.parents else {
            return Some(Violation::MissingParents { site: site.id });
        };
        for parent in parents {
            let Some(p) = tangle.site(parent) else {
                return Some(Violation::UnknownParent {
                    site: site.id,
                    parent,
                });
            };
            if parent >= site.id {
                return Some(Violation::ParentOrder {
                    site: site.id,
                    parent,
                });
            }
            if p.attach_time >= site.attach_time {
                return Some(Violation::AttachOrder {
                    site: site.id,
                    parent,
                });
            }
        }
    }

    // children adjacency, deduplicating double approvals
    let n = sites.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_degree = vec![0usize; n];
    for site in &sites[1..] {
        let [a, b] = site.parents.expect("checked above");
        children[a.0].push(site.id.0);
        out_degree[site.id.0] += 1;
        if b != a {
            children[b.0].push(site.id.0);
            out_degree[site.id.0] += 1;
        }
    }

    // Kahn: peel sites whose parents have all been peeled
    let mut ready: VecDeque<usize> = (0..n).filter(|&i| out_degree[i] == 0).collect();
    let mut ordered = 0;
    let mut remaining = out_degree;
    while let Some(i) = ready.pop_front() {
        ordered += 1;
        for &c in &children[i] {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                ready.push_back(c);
            }
        }
    }
    if ordered != n {
        return Some(Violation::Cycle {
            remaining: n - ordered,
        });
    }

    // every site must descend from genesis
    let mut reached = vec![false; n];
    reached[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for &c in &children[i] {
            if !reached[c] {
                reached[c] = true;
                queue.push_back(c);
            }
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Some(Violation::Unreachable { site: SiteId(i) });
    }

    let recounted = tangle.tip_count_at(tangle.horizon());
    if recounted != tangle.tips().len() {
        return Some(Violation::TipSetMismatch {
            recorded: tangle.tips().len(),
            recounted,
        });
    }

    if let Some(traj) = trajectory {
        for (&time, &recorded) in traj.times.iter().zip(&traj.tip_counts) {
            let recounted = tangle.tip_count_at(time);
            if recounted != recorded {
                return Some(Violation::TipCountMismatch {
                    time,
                    recorded,
                    recounted,
                });
            }
        }
    }
    None
}
