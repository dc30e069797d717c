//! From per-process delivery sequences to the agreed order `↦ = ∩ᵢ ↦ᵢ`.

use std::collections::{BTreeMap, BTreeSet};

use super::poset::{decompose_channels, BoundViolation, Channels, Poset, PosetError};
use super::Witness;
use crate::model::{MessageId, ProcessId};
use crate::trace::Trace;

/// Which processes' orders are intersected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scope {
    /// Correct processes only; elements are the messages all of them
    /// delivered.
    #[default]
    NonFaultyOnly,
    /// Every process, each constraining only the pairs it delivered both of.
    PairsDeliveredByBoth,
}

/// Per-process kbo-delivery sequences, duplicates dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliveryOrder {
    pub per_process: BTreeMap<ProcessId, Vec<MessageId>>,
    pub faulty: BTreeSet<ProcessId>,
    /// `(process, message, event step)` of every repeated delivery.
    pub duplicates: Vec<(ProcessId, MessageId, u64)>,
}

impl DeliveryOrder {
    pub fn from_trace(trace: &Trace) -> Self {
        let mut per_process: BTreeMap<ProcessId, Vec<MessageId>> =
            ProcessId::all(trace.config.n).map(|p| (p, Vec::new())).collect();
        let mut seen: BTreeSet<(ProcessId, MessageId)> = BTreeSet::new();
        let mut duplicates = Vec::new();
        for e in &trace.events {
            if let crate::trace::EventKind::DeliverMsg { msg, .. } = e.kind {
                if seen.insert((e.pid, msg)) {
                    per_process.get_mut(&e.pid).expect("pid in range").push(msg);
                } else {
                    duplicates.push((e.pid, msg, e.step));
                }
            }
        }
        DeliveryOrder { per_process, faulty: trace.faulty(), duplicates }
    }

    pub fn correct(&self) -> impl Iterator<Item = (&ProcessId, &Vec<MessageId>)> {
        self.per_process.iter().filter(|(p, _)| !self.faulty.contains(p))
    }

    /// Every chain appears, in chain order, as a subsequence of every correct
    /// process's delivery sequence.
    pub fn respects(&self, channels: &Channels<MessageId>) -> Result<(), Witness> {
        for (pid, seq) in self.correct() {
            let pos: BTreeMap<MessageId, usize> = seq.iter().enumerate().map(|(i, m)| (*m, i)).collect();
            for chain in &channels.chains {
                let on_p: Vec<&MessageId> = chain.iter().filter(|m| pos.contains_key(m)).collect();
                if let Some(w) = on_p.windows(2).find(|w| pos[w[0]] > pos[w[1]]) {
                    return Err(Witness {
                        messages: vec![*w[0], *w[1]],
                        processes: vec![*pid],
                        events: vec![],
                        detail: format!("{pid} delivers {} before {} against their channel order", w[1], w[0]),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Order {
    pub poset: Poset<MessageId>,
    /// Delivered messages left out of the element set.
    pub excluded: Vec<MessageId>,
    pub deliveries: DeliveryOrder,
}

/// Build `↦` over the chosen scope.
pub fn build_order(trace: &Trace, scope: Scope) -> Result<Order, PosetError<MessageId>> {
    let deliveries = DeliveryOrder::from_trace(trace);
    let all: BTreeSet<MessageId> = deliveries.per_process.values().flatten().copied().collect();
    let positions: BTreeMap<ProcessId, BTreeMap<MessageId, usize>> = deliveries
        .per_process
        .iter()
        .map(|(p, seq)| (*p, seq.iter().enumerate().map(|(i, m)| (*m, i)).collect()))
        .collect();
    let (elements, poset) = match scope {
        Scope::NonFaultyOnly => {
            let scoped: Vec<&BTreeMap<MessageId, usize>> =
                positions.iter().filter(|(p, _)| !deliveries.faulty.contains(p)).map(|(_, m)| m).collect();
            let elements: Vec<MessageId> = if scoped.is_empty() {
                Vec::new()
            } else {
                all.iter().copied().filter(|m| scoped.iter().all(|pos| pos.contains_key(m))).collect()
            };
            let poset = Poset::from_fn(elements.clone(), |a, b| scoped.iter().all(|pos| pos[a] < pos[b]))?;
            (elements, poset)
        }
        Scope::PairsDeliveredByBoth => {
            let elements: Vec<MessageId> = all.iter().copied().collect();
            let before = |a: &MessageId, b: &MessageId| {
                let mut constrained = false;
                for pos in positions.values() {
                    if let (Some(i), Some(j)) = (pos.get(a), pos.get(b)) {
                        if i > j {
                            return false;
                        }
                        constrained = true;
                    }
                }
                constrained
            };
            let edges: Vec<(MessageId, MessageId)> = elements
                .iter()
                .flat_map(|a| elements.iter().filter(move |b| a != *b).map(move |b| (*a, *b)))
                .filter(|(a, b)| before(a, b))
                .collect();
            // closed transitively: a < b < c orders a before c even when no
            // process delivered both
            let poset = Poset::from_edges(elements.clone(), &edges)?;
            (elements, poset)
        }
    };
    let kept: BTreeSet<MessageId> = elements.into_iter().collect();
    let excluded = all.difference(&kept).copied().collect();
    Ok(Order { poset, excluded, deliveries })
}

#[derive(Debug, thiserror::Error)]
pub enum DecomposeError {
    #[error("delivery orders do not form a partial order: {0}")]
    Poset(#[from] PosetError<MessageId>),
    #[error(transparent)]
    Bound(#[from] BoundViolation<MessageId>),
}

/// Build `↦` with the default scope and split it into at most `k` channels.
pub fn decompose_trace(trace: &Trace, k: usize) -> Result<(Order, Channels<MessageId>), DecomposeError> {
    let order = build_order(trace, Scope::NonFaultyOnly)?;
    let channels = decompose_channels(&order.poset, k)?;
    Ok((order, channels))
}
