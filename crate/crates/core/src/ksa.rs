//! Repeated k-set agreement over k-BO-broadcast.
//!
//! `propose(nb, v)` kbo-broadcasts `⟨nb, v⟩` and returns the value of the
//! first `⟨nb, -⟩` the process kbo-delivers. The blocking wait lives in the
//! simulator as an enabled predicate over [`DecisionsTable::ready`].

use std::collections::{BTreeMap, BTreeSet};

use crate::model::Value;

/// Per-process `decisions_i`. `pending` holds the decisions not yet returned;
/// `seen` remembers every instance ever inserted so that a later `⟨sn, -⟩` is
/// ignored even after the pending entry was consumed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecisionsTable {
    pending: BTreeMap<u64, Value>,
    seen: BTreeSet<u64>,
}

impl DecisionsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handle the kbo-delivery of `⟨sn, x⟩`. Returns whether it was stored.
    pub fn on_kbo_deliver(&mut self, sn: u64, x: Value) -> bool {
        if !self.seen.insert(sn) {
            return false;
        }
        self.pending.insert(sn, x);
        true
    }

    /// The wait predicate of `propose(nb, _)`.
    pub fn ready(&self, nb: u64) -> bool {
        self.pending.contains_key(&nb)
    }

    /// Return from `propose(nb, _)`: hand out and drop the pending decision.
    pub fn take(&mut self, nb: u64) -> Option<Value> {
        self.pending.remove(&nb)
    }

    pub fn pending(&self) -> &BTreeMap<u64, Value> {
        &self.pending
    }

    pub fn seen(&self) -> &BTreeSet<u64> {
        &self.seen
    }
}
