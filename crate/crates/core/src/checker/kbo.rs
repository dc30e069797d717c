use std::collections::{BTreeMap, BTreeSet};

use super::order::{build_order, Scope};
use super::{join, Verdict, Witness};
use crate::kbo::Payload;
use crate::model::{MessageId, ProcessId};
use crate::trace::{EventKind, Operation, Trace};

/// Broadcast invocations: message → (payload, event step).
pub(super) fn broadcasts(trace: &Trace) -> BTreeMap<MessageId, (&Payload, u64)> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Invoke(Operation::Broadcast { msg, payload }) if msg.sender == e.pid => {
                Some((*msg, (payload, e.step)))
            }
            _ => None,
        })
        .collect()
}

pub(super) fn check(trace: &Trace) -> Vec<Verdict> {
    let sent = broadcasts(trace);
    let correct = trace.correct();
    let mut delivered: BTreeMap<ProcessId, BTreeSet<MessageId>> = BTreeMap::new();
    let mut validity = Ok(());
    let mut integrity = Ok(());
    for e in &trace.events {
        let EventKind::DeliverMsg { msg, payload, .. } = &e.kind else { continue };
        if validity.is_ok() && sent.get(msg).map(|(p, _)| *p) != Some(payload) {
            validity = Err(Witness {
                messages: vec![*msg],
                processes: vec![e.pid],
                events: vec![e.step],
                detail: format!("{} delivers {msg}, which was never broadcast with that payload", e.pid),
            });
        }
        if !delivered.entry(e.pid).or_default().insert(*msg) && integrity.is_ok() {
            integrity = Err(Witness {
                messages: vec![*msg],
                processes: vec![e.pid],
                events: vec![e.step],
                detail: format!("{} delivers {msg} twice", e.pid),
            });
        }
    }

    let bounded = match build_order(trace, Scope::NonFaultyOnly) {
        Err(e) => Err(Witness::detail(format!("no partial order: {e}"))),
        Ok(order) => {
            let width = order.poset.width();
            if width <= trace.config.k {
                Ok(())
            } else {
                let anti = order.poset.first_maximum_antichain();
                Err(Witness {
                    detail: format!("antichain {} of size {width} > k = {}", join(&anti), trace.config.k),
                    messages: anti,
                    ..Default::default()
                })
            }
        }
    };

    let none = BTreeSet::new();
    let got = |p: &ProcessId| delivered.get(p).unwrap_or(&none);
    let termination1 = || {
        for (m, (_, step)) in &sent {
            if correct.contains(&m.sender) && !got(&m.sender).contains(m) {
                return Err(Witness {
                    messages: vec![*m],
                    processes: vec![m.sender],
                    events: vec![*step],
                    detail: format!("correct {} never delivers its own {m}", m.sender),
                });
            }
        }
        Ok(())
    };
    let termination2 = || {
        for (p, ms) in &delivered {
            for m in ms {
                if let Some(q) = correct.iter().find(|q| !got(q).contains(m)) {
                    return Err(Witness {
                        messages: vec![*m],
                        processes: vec![*p, *q],
                        events: vec![],
                        detail: format!("{p} delivers {m} but correct {q} never does"),
                    });
                }
            }
        }
        Ok(())
    };

    vec![
        Verdict::from_result("KBO-Validity", validity),
        Verdict::from_result("KBO-Integrity", integrity),
        Verdict::from_result("KBO-Bounded", bounded),
        Verdict::liveness("KBO-Termination-1", trace, termination1),
        Verdict::liveness("KBO-Termination-2", trace, termination2),
    ]
}
