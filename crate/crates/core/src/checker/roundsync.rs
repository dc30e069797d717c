//! Round synchronization of k-SCD delivery.
//!
//! `p_i` participates in round `r` when it delivers a set at round `r`; at
//! the end of a quiescent run it also stands at round `|delivered_i|`.
//! `msgs_i(r, r')` is the union of the sets `p_i` delivered at rounds in
//! `[r, r')`. For every round `r` where all correct processes participate,
//! there must be a later round `r' ≤ r + k`, also common to all, where
//! every correct process has delivered the same `msgs_i(r, r')`.

use std::collections::{BTreeMap, BTreeSet};

use super::{join, Verdict, Witness};
use crate::model::{MessageId, ProcessId};
use crate::trace::Trace;

const PROPERTY: &str = "RoundSync";

pub(super) fn check(trace: &Trace) -> Verdict {
    if !trace.is_quiescent() {
        return Verdict::not_evaluated(PROPERTY, "run not quiescent");
    }
    let sets = trace.delivered_sets();
    if sets.iter().all(Vec::is_empty) {
        return Verdict::not_evaluated(PROPERTY, "no message sets in trace");
    }
    let k = trace.config.k as u64;
    let correct = trace.correct();
    // per correct process: round → set delivered at that round
    let mut logs: BTreeMap<ProcessId, BTreeMap<u64, BTreeSet<MessageId>>> = BTreeMap::new();
    let mut rounds: BTreeMap<ProcessId, BTreeSet<u64>> = BTreeMap::new();
    for p in &correct {
        let log: BTreeMap<u64, BTreeSet<MessageId>> =
            sets[p.index()].iter().map(|(r, msgs, _)| (*r, (*msgs).clone())).collect();
        let total: u64 = log.values().map(|s| s.len() as u64).sum();
        let mut part: BTreeSet<u64> = log.keys().copied().collect();
        part.insert(total);
        logs.insert(*p, log);
        rounds.insert(*p, part);
    }
    let mut common = rounds.values();
    let Some(first) = common.next() else {
        return Verdict::not_evaluated(PROPERTY, "no correct process");
    };
    let common: BTreeSet<u64> = common.fold(first.clone(), |acc, s| acc.intersection(s).copied().collect());
    let msgs = |p: &ProcessId, r: u64, r2: u64| -> BTreeSet<MessageId> {
        logs[p].range(r..r2).flat_map(|(_, s)| s.iter().copied()).collect()
    };
    let last = common.iter().next_back().copied().unwrap_or(0);
    for &r in &common {
        if r == last {
            continue;
        }
        let synced = common.range(r + 1..=r + k).any(|&r2| {
            let mut it = correct.iter().map(|p| msgs(p, r, r2));
            let first = it.next().unwrap_or_default();
            it.all(|m| m == first)
        });
        if !synced {
            let detail = correct
                .iter()
                .map(|p| format!("{p}: {}", join(msgs(p, r, r + k + 1))))
                .collect::<Vec<_>>()
                .join("; ");
            return Verdict::fail(
                PROPERTY,
                Witness {
                    processes: correct.iter().copied().collect(),
                    detail: format!("no common round in ({r}, {}] with equal deliveries; {detail}", r + k),
                    ..Default::default()
                },
            );
        }
    }
    Verdict::pass(PROPERTY)
}
