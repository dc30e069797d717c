use std::collections::{BTreeMap, BTreeSet};

use super::kbo::broadcasts;
use super::{Verdict, Witness};
use crate::model::{MessageId, ProcessId};
use crate::trace::Trace;

const PROPERTIES: [&str; 6] = [
    "KSCD-Validity",
    "KSCD-Integrity",
    "KSCD-Ordering",
    "KSCD-Bounded",
    "KSCD-Termination-1",
    "KSCD-Termination-2",
];

/// For each process: message → (index of its set, event step).
type SetIndex = BTreeMap<ProcessId, Positions>;
type Positions = BTreeMap<MessageId, (usize, u64)>;

pub(super) fn check(trace: &Trace) -> Vec<Verdict> {
    let sets = trace.delivered_sets();
    if sets.iter().all(Vec::is_empty) {
        return PROPERTIES.iter().map(|p| Verdict::not_evaluated(p, "no message sets in trace")).collect();
    }
    let sent = broadcasts(trace);
    let correct = trace.correct();
    let k = trace.config.k;

    let mut at: SetIndex = BTreeMap::new();
    let mut validity = Ok(());
    let mut integrity = Ok(());
    let mut bounded = Ok(());
    for (i, per) in sets.iter().enumerate() {
        let pid = ProcessId::from_index(i);
        let idx = at.entry(pid).or_default();
        for (s, (_, msgs, ev)) in per.iter().enumerate() {
            let step = trace.events[*ev].step;
            if msgs.len() > k && bounded.is_ok() {
                bounded = Err(Witness {
                    messages: msgs.iter().copied().collect(),
                    processes: vec![pid],
                    events: vec![step],
                    detail: format!("{pid} delivers a set of {} messages, k = {k}", msgs.len()),
                });
            }
            if msgs.is_empty() && bounded.is_ok() {
                bounded = Err(Witness {
                    processes: vec![pid],
                    events: vec![step],
                    detail: format!("{pid} delivers an empty set"),
                    ..Default::default()
                });
            }
            for m in msgs.iter() {
                if !sent.contains_key(m) && validity.is_ok() {
                    validity = Err(Witness {
                        messages: vec![*m],
                        processes: vec![pid],
                        events: vec![step],
                        detail: format!("{pid} delivers {m}, which was never broadcast"),
                    });
                }
                if let Some(earlier @ (_, first)) = idx.insert(*m, (s, step)) {
                    if integrity.is_ok() {
                        integrity = Err(Witness {
                            messages: vec![*m],
                            processes: vec![pid],
                            events: vec![first, step],
                            detail: format!("{pid} delivers {m} twice"),
                        });
                    }
                    idx.insert(*m, earlier);
                }
            }
        }
    }

    let ordering = ordering(&at);

    let none = BTreeMap::new();
    let got = |p: &ProcessId| at.get(p).unwrap_or(&none);
    let termination1 = || {
        for (m, (_, step)) in &sent {
            if correct.contains(&m.sender) && !got(&m.sender).contains_key(m) {
                return Err(Witness {
                    messages: vec![*m],
                    processes: vec![m.sender],
                    events: vec![*step],
                    detail: format!("correct {} never delivers a set containing its own {m}", m.sender),
                });
            }
        }
        Ok(())
    };
    let termination2 = || {
        let all: BTreeSet<(MessageId, ProcessId)> =
            at.iter().flat_map(|(p, ms)| ms.keys().map(move |m| (*m, *p))).collect();
        for (m, p) in all {
            if let Some(q) = correct.iter().find(|q| !got(q).contains_key(&m)) {
                return Err(Witness {
                    messages: vec![m],
                    processes: vec![p, *q],
                    events: vec![],
                    detail: format!("{p} delivers {m} but correct {q} never does"),
                });
            }
        }
        Ok(())
    };

    vec![
        Verdict::from_result(PROPERTIES[0], validity),
        Verdict::from_result(PROPERTIES[1], integrity),
        Verdict::from_result(PROPERTIES[2], ordering),
        Verdict::from_result(PROPERTIES[3], bounded),
        Verdict::liveness(PROPERTIES[4], trace, termination1),
        Verdict::liveness(PROPERTIES[5], trace, termination2),
    ]
}

/// No `p_i` delivers `m` in a set strictly before `m'` while some `p_j`
/// delivers `m'` in a set strictly before `m`.
fn ordering(at: &SetIndex) -> Result<(), Witness> {
    let procs: Vec<(&ProcessId, &Positions)> = at.iter().collect();
    for (a, (pi, si)) in procs.iter().enumerate() {
        for (pj, sj) in &procs[a + 1..] {
            let common: Vec<&MessageId> = si.keys().filter(|m| sj.contains_key(m)).collect();
            for (x, m) in common.iter().enumerate() {
                for m2 in &common[x + 1..] {
                    let (im, im2) = (si[*m], si[*m2]);
                    let (jm, jm2) = (sj[*m], sj[*m2]);
                    let crossed = (im.0 < im2.0 && jm2.0 < jm.0) || (im2.0 < im.0 && jm.0 < jm2.0);
                    if crossed {
                        let (first_i, first_j) = if im.0 < im2.0 { (*m, *m2) } else { (*m2, *m) };
                        return Err(Witness {
                            messages: vec![**m, **m2],
                            processes: vec![**pi, **pj],
                            events: vec![im.1, im2.1, jm.1, jm2.1],
                            detail: format!(
                                "{pi} delivers {first_i} before {first_j}, {pj} delivers {first_j} before {first_i}"
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
