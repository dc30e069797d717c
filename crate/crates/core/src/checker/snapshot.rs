use std::collections::{BTreeMap, BTreeSet};

use super::{Verdict, Witness};
use crate::model::ProcessId;
use crate::trace::{AccessOp, Datum, EventKind, ObjectId, Trace};

type Cells = Vec<Option<Datum>>;

/// `a ⊆ b` as views: every non-⊥ entry of `a` is in `b` at the same slot.
fn contained(a: &Cells, b: &Cells) -> bool {
    a.iter().zip(b).all(|(x, y)| x.is_none() || x == y)
}

pub(super) fn check(trace: &Trace) -> Vec<Verdict> {
    let n = trace.config.n;
    let mut state: BTreeMap<ObjectId, Cells> = BTreeMap::new();
    let mut written: BTreeSet<(ObjectId, ProcessId)> = BTreeSet::new();
    let mut snapped: BTreeSet<(ObjectId, ProcessId)> = BTreeSet::new();
    let mut views: BTreeMap<ObjectId, Vec<(ProcessId, u64, Cells)>> = BTreeMap::new();
    let mut replay = Ok(());
    let mut any = false;

    for e in &trace.events {
        let EventKind::ObjectAccess(a) = &e.kind else { continue };
        if matches!(a.object, ObjectId::Ksa(_)) {
            continue;
        }
        any = true;
        let one_shot = a.object != ObjectId::Mem;
        let cells = state.entry(a.object).or_insert_with(|| vec![None; n]);
        let key = (a.object, e.pid);
        let fail = |detail: String| Witness { processes: vec![e.pid], events: vec![e.step], detail, ..Default::default() };
        match &a.op {
            AccessOp::Write { value } => {
                if one_shot && !written.insert(key) && replay.is_ok() {
                    replay = Err(fail(format!("{} writes one-shot {} twice", e.pid, a.object)));
                }
                cells[e.pid.index()] = Some(value.clone());
            }
            AccessOp::Snapshot { result } => {
                if replay.is_ok() {
                    if one_shot && (!written.contains(&key) || !snapped.insert(key)) {
                        replay = Err(fail(format!("{} breaks the one-shot discipline on {}", e.pid, a.object)));
                    } else if result != cells {
                        replay = Err(fail(format!(
                            "snapshot of {} by {} differs from the replayed state",
                            a.object, e.pid
                        )));
                    }
                }
                if one_shot {
                    views.entry(a.object).or_default().push((e.pid, e.step, result.clone()));
                }
            }
            AccessOp::Propose { .. } => {
                if replay.is_ok() {
                    replay = Err(fail(format!("propose on snapshot object {}", a.object)));
                }
            }
        }
    }
    if !any {
        return vec![
            Verdict::not_evaluated("Snapshot-Containment", "no snapshot accesses in trace"),
            Verdict::not_evaluated("Snapshot-Replay", "no snapshot accesses in trace"),
        ];
    }

    let containment = views
        .iter()
        .find_map(|(obj, vs)| {
            vs.iter().enumerate().find_map(|(i, (p, s, a))| {
                vs[i + 1..].iter().find_map(|(q, t, b)| {
                    (!contained(a, b) && !contained(b, a)).then(|| Witness {
                        processes: vec![*p, *q],
                        events: vec![*s, *t],
                        detail: format!("views of {p} and {q} on {obj} are incomparable"),
                        ..Default::default()
                    })
                })
            })
        })
        .map_or(Ok(()), Err);

    vec![
        Verdict::from_result("Snapshot-Containment", containment),
        Verdict::from_result("Snapshot-Replay", replay),
    ]
}
