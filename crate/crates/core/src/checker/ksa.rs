use std::collections::{BTreeMap, BTreeSet};

use super::{join, Verdict, Witness};
use crate::model::{MessageId, ProcessId, Value};
use crate::trace::{AccessOp, Datum, EventKind, ObjectId, Operation, Trace};

/// Set agreement as seen by `propose` callers, plus the same two safety
/// properties for the underlying oracle instances.
/// Value → every `(process, step)` that decided it.
type Deciders<V> = BTreeMap<V, Vec<(ProcessId, u64)>>;

pub(super) fn check(trace: &Trace) -> Vec<Verdict> {
    let k = trace.config.k;
    let correct = trace.correct();
    let mut proposed: BTreeMap<u64, BTreeSet<&Value>> = BTreeMap::new();
    let mut proposers: BTreeMap<(ProcessId, u64), u64> = BTreeMap::new();
    let mut decided: BTreeMap<u64, Deciders<&Value>> = BTreeMap::new();
    let mut validity = Ok(());
    let mut oracle_in: BTreeMap<u64, BTreeSet<MessageId>> = BTreeMap::new();
    let mut oracle_out: BTreeMap<u64, Deciders<MessageId>> = BTreeMap::new();
    let mut oracle_validity = Ok(());

    for e in &trace.events {
        match &e.kind {
            EventKind::Invoke(Operation::Propose { instance, value }) => {
                proposed.entry(*instance).or_default().insert(value);
                proposers.insert((e.pid, *instance), e.step);
            }
            EventKind::Decide { instance, value } => {
                if validity.is_ok() && !proposed.get(instance).is_some_and(|s| s.contains(value)) {
                    validity = Err(Witness {
                        processes: vec![e.pid],
                        events: vec![e.step],
                        detail: format!("{} decides {value} in instance {instance}, never proposed there", e.pid),
                        ..Default::default()
                    });
                }
                decided.entry(*instance).or_default().entry(value).or_default().push((e.pid, e.step));
            }
            EventKind::ObjectAccess(a) => {
                if let (ObjectId::Ksa(r), AccessOp::Propose { value: Datum::Msg(v), result: Datum::Msg(d) }) =
                    (a.object, &a.op)
                {
                    let seen = oracle_in.entry(r).or_default();
                    seen.insert(*v);
                    if oracle_validity.is_ok() && !seen.contains(d) {
                        oracle_validity = Err(Witness {
                            messages: vec![*d],
                            processes: vec![e.pid],
                            events: vec![e.step],
                            detail: format!("ksa/{r} returns {d} before anyone proposed it"),
                        });
                    }
                    oracle_out.entry(r).or_default().entry(*d).or_default().push((e.pid, e.step));
                }
            }
            _ => {}
        }
    }

    let agreement = decided
        .iter()
        .find(|(_, vals)| vals.len() > k)
        .map_or(Ok(()), |(instance, vals)| {
            let who: Vec<(ProcessId, u64)> = vals.values().map(|v| v[0]).collect();
            Err(Witness {
                processes: who.iter().map(|w| w.0).collect(),
                events: who.iter().map(|w| w.1).collect(),
                detail: format!("instance {instance} decides {} values {}, k = {k}", vals.len(), join(vals.keys())),
                ..Default::default()
            })
        });
    let oracle_agreement = oracle_out
        .iter()
        .find(|(_, vals)| vals.len() > k)
        .map_or(Ok(()), |(r, vals)| {
            let who: Vec<(ProcessId, u64)> = vals.values().map(|v| v[0]).collect();
            Err(Witness {
                messages: vals.keys().copied().collect(),
                processes: who.iter().map(|w| w.0).collect(),
                events: who.iter().map(|w| w.1).collect(),
                detail: format!("ksa/{r} returns {} values, k = {k}", vals.len()),
            })
        });
    let termination = || {
        for ((p, instance), step) in &proposers {
            let done = decided.get(instance).is_some_and(|vals| vals.values().flatten().any(|(q, _)| q == p));
            if correct.contains(p) && !done {
                return Err(Witness {
                    processes: vec![*p],
                    events: vec![*step],
                    detail: format!("correct {p} never decides instance {instance}"),
                    ..Default::default()
                });
            }
        }
        Ok(())
    };

    vec![
        Verdict::from_result("KSA-Validity", validity),
        Verdict::from_result("KSA-Agreement", agreement),
        Verdict::liveness("KSA-Termination", trace, termination),
        Verdict::from_result("Oracle-Validity", oracle_validity),
        Verdict::from_result("Oracle-Agreement", oracle_agreement),
    ]
}
