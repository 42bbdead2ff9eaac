//! Tip set with O(1) insertion, removal and uniform sampling.

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

/// Sequence number of a site; genesis is 0, later sites are numbered in
/// issue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteId(pub usize);

impl SiteId {
    pub const GENESIS: SiteId = SiteId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

const ABSENT: usize = usize::MAX;

/// The current tips, stored as a dense vector plus a position index keyed by
/// site id. Removal swaps the last element into the hole.
#[derive(Debug, Clone, Default)]
pub struct TipSet {
    members: Vec<SiteId>,
    position: Vec<usize>,
}

impl TipSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: SiteId) -> bool {
        self.position.get(id.0).is_some_and(|&p| p != ABSENT)
    }

    /// Returns false if `id` was already a tip.
    pub fn insert(&mut self, id: SiteId) -> bool {
        if self.contains(id) {
            return false;
        }
        if id.0 >= self.position.len() {
            self.position.resize(id.0 + 1, ABSENT);
        }
        self.position[id.0] = self.members.len();
        self.members.push(id);
        true
    }

    /// Returns false if `id` was not a tip.
    pub fn remove(&mut self, id: SiteId) -> bool {
        if !self.contains(id) {
            return false;
        }
        let slot = self.position[id.0];
        self.members.swap_remove(slot);
        self.position[id.0] = ABSENT;
        if let Some(&moved) = self.members.get(slot) {
            self.position[moved.0] = slot;
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.members.iter().copied()
    }

    /// Two independent uniform draws with replacement. `None` on an empty set.
    pub fn select_pair(&self, rng: &mut dyn RngCore) -> Option<(SiteId, SiteId)> {
        if self.members.is_empty() {
            return None;
        }
        let n = self.members.len();
        let a = self.members[rng.random_range(0..n)];
        let b = self.members[rng.random_range(0..n)];
        Some((a, b))
    }
}

impl FromIterator<SiteId> for TipSet {
    fn from_iter<I: IntoIterator<Item = SiteId>>(iter: I) -> Self {
        let mut set = TipSet::new();
        for id in iter {
            set.insert(id);
        }
        set
    }
}
