//! The three-process, six-message example and its checked-in files.
//!
//! Messages `m1..m6` map to identities `1:0, 2:0, 3:0, 1:1, 2:1, 3:1`. The
//! hand-authored trace holds the example's delivery sequences; the scripted
//! scenario is an attempt to produce them by running the stack, and the run
//! file is that scenario's recorded trace.

use crate::checker::{decompose_trace, Channels, DecomposeError};
use crate::checker::poset::BoundViolation;
use crate::kbo::Payload;
use crate::model::{MessageId, ProcessId, Value};
use crate::scenario::{ScenarioConfig, SchedulePolicy, WorkItem, SCENARIO_VERSION};
use crate::sim::{self, SimError};
use crate::trace::{Event, EventKind, Footer, Operation, Outcome, Trace};

pub const EXAMPLE_TRACE: &str = include_str!("../golden/three_process_example.trace.jsonl");
pub const EXAMPLE_SCENARIO: &str = include_str!("../golden/three_process_example.scenario.toml");
pub const EXAMPLE_RUN: &str = include_str!("../golden/three_process_example.run.jsonl");

/// `m1..m6`.
pub fn example_ids() -> [MessageId; 6] {
    let m = |s, i| MessageId::new(ProcessId::new(s), i);
    [m(1, 0), m(2, 0), m(3, 0), m(1, 1), m(2, 1), m(3, 1)]
}

/// Label `m1..m6` of an example message.
pub fn label(id: MessageId) -> String {
    format!("m{}", id.index * 3 + id.sender.get())
}

/// The delivery sequences at p1, p2 and p3.
pub fn example_sequences() -> Vec<Vec<MessageId>> {
    let m = example_ids();
    let seq = |xs: [usize; 6]| xs.iter().map(|&x| m[x - 1]).collect();
    vec![seq([1, 2, 3, 4, 5, 6]), seq([2, 1, 5, 3, 4, 6]), seq([2, 3, 1, 5, 4, 6])]
}

/// A trace holding only broadcast invocations (in sender order) and the
/// given kbo-delivery sequences, one process after another. Payloads are the
/// message labels.
pub fn trace_from_sequences(n: usize, k: usize, seqs: &[Vec<MessageId>]) -> Trace {
    let mut ids: Vec<MessageId> = seqs.iter().flatten().copied().collect();
    ids.sort();
    ids.dedup();
    let payload = |m: MessageId| Payload::Data(Value::new(label(m)));
    let mut workload = vec![Vec::new(); n];
    let mut events = Vec::new();
    let mut push = |pid, kind| {
        let step = events.len() as u64;
        events.push(Event { step, pid, kind });
    };
    for &m in &ids {
        workload[m.sender.index()].push(WorkItem::Broadcast(Value::new(label(m))));
        push(m.sender, EventKind::Invoke(Operation::Broadcast { msg: m, payload: payload(m) }));
    }
    for (i, seq) in seqs.iter().enumerate() {
        for (position, &msg) in seq.iter().enumerate() {
            push(ProcessId::from_index(i), EventKind::DeliverMsg { msg, position, payload: payload(msg) });
        }
    }
    let config = ScenarioConfig {
        version: SCENARIO_VERSION,
        n,
        k,
        seed: 0,
        schedule_policy: SchedulePolicy::RoundRobin,
        crash_plan: vec![],
        workload,
        step_budget: 1,
        oracle_policy: Default::default(),
    };
    Trace { config, events, footer: Footer { outcome: Outcome::Quiescent, ticks: 0, max_wait: 0 } }
}

/// Everything the example is checked against.
#[derive(Debug)]
pub struct ExampleReport {
    /// Sequences produced by running the scripted scenario.
    pub replayed: Vec<Vec<MessageId>>,
    pub replay_matches: bool,
    /// Width of the order in the hand-authored trace.
    pub width: usize,
    pub k2: Result<Channels<MessageId>, String>,
    pub k1: Result<Channels<MessageId>, Option<BoundViolation<MessageId>>>,
}

pub fn check_example() -> Result<ExampleReport, SimError> {
    let cfg = ScenarioConfig::from_toml(EXAMPLE_SCENARIO)?;
    let run = sim::run(&cfg)?;
    let replayed = run.deliveries();
    let expected = example_sequences();
    let trace = Trace::from_jsonl(EXAMPLE_TRACE).expect("golden trace parses");
    let width = crate::checker::build_order(&trace, Default::default())
        .map(|o| o.poset.width())
        .unwrap_or(usize::MAX);
    let k2 = decompose_trace(&trace, 2).map(|(_, c)| c).map_err(|e| e.to_string());
    let k1 = decompose_trace(&trace, 1).map(|(_, c)| c).map_err(|e| match e {
        DecomposeError::Bound(b) => Some(b),
        _ => None,
    });
    Ok(ExampleReport { replay_matches: replayed == expected, replayed, width, k2, k1 })
}

/// Like [`trace_from_sequences`], but each process delivers whole sets: a
/// `deliver-set` event for round `r`, then its messages in identity order.
pub fn trace_from_sets(n: usize, k: usize, sets: &[Vec<Vec<MessageId>>]) -> Trace {
    let seqs: Vec<Vec<MessageId>> = sets
        .iter()
        .map(|per| {
            per.iter()
                .flat_map(|s| {
                    let mut s = s.clone();
                    s.sort();
                    s
                })
                .collect()
        })
        .collect();
    let mut trace = trace_from_sequences(n, k, &seqs);
    let invokes = trace.events.iter().take_while(|e| matches!(e.kind, EventKind::Invoke(_))).count();
    let mut delivers = trace.events.split_off(invokes).into_iter();
    for (i, per) in sets.iter().enumerate() {
        for (round, s) in per.iter().enumerate() {
            let step = trace.events.len() as u64;
            let msgs = s.iter().copied().collect();
            trace.events.push(Event { step, pid: ProcessId::from_index(i), kind: EventKind::DeliverSet { round: round as u64, msgs } });
            for _ in 0..s.len() {
                let mut e = delivers.next().expect("one deliver-msg per message");
                e.step = trace.events.len() as u64;
                trace.events.push(e);
            }
        }
    }
    trace
}

/// p1 delivers `{m1}` then `{m2}`, p2 delivers `{m2}` then `{m1}`.
pub fn forged_scd_ordering() -> Trace {
    let m = example_ids();
    trace_from_sets(2, 2, &[vec![vec![m[0]], vec![m[1]]], vec![vec![m[1]], vec![m[0]]]])
}

/// Three processes that pairwise disagree on `m1`, `m2`, `m3` under k = 2.
pub fn forged_width3() -> Trace {
    let m = example_ids();
    trace_from_sequences(3, 2, &[vec![m[0], m[1], m[2]], vec![m[1], m[2], m[0]], vec![m[2], m[0], m[1]]])
}

pub const FORGED_SCD_ORDERING: &str = include_str!("../golden/forged_scd_ordering.trace.jsonl");
pub const FORGED_WIDTH3: &str = include_str!("../golden/forged_width3.trace.jsonl");
