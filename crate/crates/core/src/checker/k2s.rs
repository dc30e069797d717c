use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;

use super::{join, Verdict, Witness};
use crate::k2s::K2sOutput;
use crate::model::{MessageId, ProcessId};
use crate::trace::{AccessOp, Datum, EventKind, ObjectId, Trace};

const PROPERTIES: [&str; 6] = [
    "K2S-Validity",
    "K2S-Set-Size",
    "K2S-View-Size",
    "K2S-Intra-Inclusion",
    "K2S-Inter-Inclusion",
    "K2S-Termination",
];

fn show<V: Ord + Display>(out: &K2sOutput<V>) -> String {
    join(out.sets.iter().map(|s| join(s.iter())))
}

/// The six K2S properties for one instance.
///
/// `inputs` are the distinct values proposed to the instance, `outputs` the
/// returned sets per process, `invokers` every process that started a call.
/// Termination is checked only when `liveness` is set.
pub fn k2s_instance_verdicts<V: Ord + Clone + Display>(
    k: usize,
    inputs: &BTreeSet<V>,
    outputs: &BTreeMap<ProcessId, K2sOutput<V>>,
    invokers: &BTreeSet<ProcessId>,
    faulty: &BTreeSet<ProcessId>,
    liveness: bool,
) -> Vec<Verdict> {
    let bound = k.min(inputs.len());
    let fail = |p: &ProcessId, detail: String| Witness { processes: vec![*p], detail, ..Default::default() };
    let each = |f: &dyn Fn(&ProcessId, &K2sOutput<V>) -> Option<String>| {
        outputs.iter().find_map(|(p, o)| f(p, o).map(|d| fail(p, d))).map_or(Ok(()), Err)
    };

    let validity = each(&|p, o| {
        o.sets
            .iter()
            .flatten()
            .find(|v| !inputs.contains(v))
            .map(|v| format!("{p} returns {v}, never proposed"))
    });
    let set_size = each(&|p, o| {
        let n = o.sets.len();
        (n < 1 || n > bound).then(|| format!("{p} returns {} views, bound {bound}", n))
    });
    let view_size = each(&|p, o| {
        o.sets
            .iter()
            .find(|v| v.is_empty() || v.len() > bound)
            .map(|v| format!("{p} returns view {} of size {}, bound {bound}", join(v.iter()), v.len()))
    });
    let intra = each(&|p, o| (!o.is_chain()).then(|| format!("{p} returns non-nested views {}", show(o))));
    let outs: Vec<_> = outputs.iter().collect();
    let inter = outs
        .iter()
        .enumerate()
        .find_map(|(i, (p, a))| {
            outs[i + 1..].iter().find_map(|(q, b)| {
                (!a.is_subset(b) && !b.is_subset(a)).then(|| Witness {
                    processes: vec![**p, **q],
                    detail: format!("{p} returns {}, {q} returns {}", show(a), show(b)),
                    ..Default::default()
                })
            })
        })
        .map_or(Ok(()), Err);
    let termination = if liveness {
        Verdict::from_result(
            PROPERTIES[5],
            invokers
                .iter()
                .find(|p| !faulty.contains(p) && !outputs.contains_key(p))
                .map_or(Ok(()), |p| Err(fail(p, format!("correct {p} never returns")))),
        )
    } else {
        Verdict::not_evaluated(PROPERTIES[5], "run not quiescent")
    };

    vec![
        Verdict::from_result(PROPERTIES[0], validity),
        Verdict::from_result(PROPERTIES[1], set_size),
        Verdict::from_result(PROPERTIES[2], view_size),
        Verdict::from_result(PROPERTIES[3], intra),
        Verdict::from_result(PROPERTIES[4], inter),
        termination,
    ]
}

#[derive(Default)]
struct Instance {
    inputs: BTreeSet<MessageId>,
    invokers: BTreeSet<ProcessId>,
    outputs: BTreeMap<ProcessId, K2sOutput<MessageId>>,
    steps: Vec<u64>,
}

pub(super) fn check(trace: &Trace) -> Vec<Verdict> {
    let mut rounds: BTreeMap<u64, Instance> = BTreeMap::new();
    for e in &trace.events {
        let EventKind::ObjectAccess(a) = &e.kind else { continue };
        match (a.object, &a.op) {
            (ObjectId::Ksa(r), AccessOp::Propose { value: Datum::Msg(m), .. }) => {
                let inst = rounds.entry(r).or_default();
                inst.inputs.insert(*m);
                inst.invokers.insert(e.pid);
                inst.steps.push(e.step);
            }
            (ObjectId::Snap2(r), AccessOp::Snapshot { result }) => {
                let inst = rounds.entry(r).or_default();
                let sets = result.iter().flatten().filter_map(Datum::as_set).cloned().collect();
                inst.outputs.insert(e.pid, K2sOutput { sets });
                inst.steps.push(e.step);
            }
            _ => {}
        }
    }
    if rounds.is_empty() {
        return PROPERTIES.iter().map(|p| Verdict::not_evaluated(p, "no K2S instance in trace")).collect();
    }
    let faulty = trace.faulty();
    let mut merged: Vec<Verdict> = PROPERTIES.iter().map(|p| Verdict::pass(p)).collect();
    if !trace.is_quiescent() {
        merged[5] = Verdict::not_evaluated(PROPERTIES[5], "run not quiescent");
    }
    for (r, inst) in &rounds {
        let vs =
            k2s_instance_verdicts(trace.config.k, &inst.inputs, &inst.outputs, &inst.invokers, &faulty, trace.is_quiescent());
        for (m, v) in merged.iter_mut().zip(vs) {
            if v.failed() && !m.failed() {
                let mut w = v.witness.unwrap_or_default();
                w.detail = format!("round {r}: {}", w.detail);
                w.events = inst.steps.clone();
                *m = Verdict::fail(&v.property, w);
            }
        }
    }
    merged
}
