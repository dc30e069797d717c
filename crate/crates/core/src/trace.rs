//! The event log of one run and its line-delimited JSON file form.
//!
//! A trace file is a header line `{"trace":1,"config":{..}}`, one line per
//! event with fields in the order `step, pid, kind, payload`, and a footer
//! line `{"outcome":..,"ticks":..,"max_wait":..}`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::kbo::Payload;
use crate::model::{MessageId, ProcessId, Value};
use crate::scenario::ScenarioConfig;

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    pub pid: ProcessId,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventKind {
    Invoke(Operation),
    Return(Operation),
    ObjectAccess(ObjectAccess),
    DeliverSet { round: u64, msgs: BTreeSet<MessageId> },
    DeliverMsg { msg: MessageId, position: usize, payload: Payload },
    Decide { instance: u64, value: Value },
    Crash { tick: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Operation {
    Broadcast { msg: MessageId, payload: Payload },
    Propose { instance: u64, value: Value },
}

/// Shared objects as named in traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectId {
    Mem,
    Ksa(u64),
    Snap1(u64),
    Snap2(u64),
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::Mem => f.write_str("mem"),
            ObjectId::Ksa(r) => write!(f, "ksa/{r}"),
            ObjectId::Snap1(r) => write!(f, "snap1/{r}"),
            ObjectId::Snap2(r) => write!(f, "snap2/{r}"),
        }
    }
}

impl std::str::FromStr for ObjectId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mem" {
            return Ok(ObjectId::Mem);
        }
        let (name, r) = s.split_once('/').ok_or_else(|| format!("unknown object `{s}`"))?;
        let r: u64 = r.parse().map_err(|_| format!("bad round in object `{s}`"))?;
        match name {
            "ksa" => Ok(ObjectId::Ksa(r)),
            "snap1" => Ok(ObjectId::Snap1(r)),
            "snap2" => Ok(ObjectId::Snap2(r)),
            _ => Err(format!("unknown object `{s}`")),
        }
    }
}

impl Serialize for ObjectId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A cell value in a shared object: a message (k-SA values, SNAP1 cells) or
/// a message set (MEM cells, SNAP2 views).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Datum {
    Msg(MessageId),
    Set(BTreeSet<MessageId>),
}

impl Datum {
    pub fn as_msg(&self) -> Option<MessageId> {
        match self {
            Datum::Msg(m) => Some(*m),
            Datum::Set(_) => None,
        }
    }

    pub fn as_set(&self) -> Option<&BTreeSet<MessageId>> {
        match self {
            Datum::Set(s) => Some(s),
            Datum::Msg(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectAccess {
    pub object: ObjectId,
    #[serde(flatten)]
    pub op: AccessOp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum AccessOp {
    Write { value: Datum },
    Snapshot { result: Vec<Option<Datum>> },
    Propose { value: Datum, result: Datum },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Quiescent,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footer {
    pub outcome: Outcome,
    /// Scheduler ticks used.
    pub ticks: u64,
    /// Longest run of ticks an enabled process went unscheduled.
    pub max_wait: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub config: ScenarioConfig,
    pub events: Vec<Event>,
    pub footer: Footer,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    trace: u32,
    config: ScenarioConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("trace is empty")]
    Empty,
    #[error("trace has no footer line")]
    MissingFooter,
    #[error("unsupported trace version {0}")]
    Version(u32),
    #[error("line {line}: step {step} does not follow step {prev}")]
    StepOrder { line: usize, step: u64, prev: u64 },
    #[error("line {line}: event of {pid} after its crash")]
    AfterCrash { line: usize, pid: ProcessId },
    #[error("line {line}: {pid} outside 1..={n}")]
    UnknownProcess { line: usize, pid: ProcessId, n: usize },
}

impl Trace {
    pub fn outcome(&self) -> Outcome {
        self.footer.outcome
    }

    pub fn is_quiescent(&self) -> bool {
        self.footer.outcome == Outcome::Quiescent
    }

    /// Processes with a crash event.
    pub fn faulty(&self) -> BTreeSet<ProcessId> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Crash { .. }))
            .map(|e| e.pid)
            .collect()
    }

    pub fn correct(&self) -> BTreeSet<ProcessId> {
        let faulty = self.faulty();
        ProcessId::all(self.config.n).filter(|p| !faulty.contains(p)).collect()
    }

    /// Per-process sequences of kbo-delivered messages, in delivery order.
    pub fn deliveries(&self) -> Vec<Vec<MessageId>> {
        let mut out = vec![Vec::new(); self.config.n];
        for e in &self.events {
            if let EventKind::DeliverMsg { msg, .. } = e.kind {
                out[e.pid.index()].push(msg);
            }
        }
        out
    }

    /// Per-process sequences of kscd-delivered sets with their rounds.
    pub fn delivered_sets(&self) -> Vec<Vec<(u64, &BTreeSet<MessageId>, usize)>> {
        let mut out = vec![Vec::new(); self.config.n];
        for (i, e) in self.events.iter().enumerate() {
            if let EventKind::DeliverSet { round, msgs } = &e.kind {
                out[e.pid.index()].push((*round, msgs, i));
            }
        }
        out
    }

    /// Canonical file form. Equal traces give equal bytes.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header { trace: TRACE_VERSION, config: self.config.clone() };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).unwrap();
        for e in &self.events {
            writeln!(out, "{}", serde_json::to_string(e).expect("event serializes")).unwrap();
        }
        writeln!(out, "{}", serde_json::to_string(&self.footer).expect("footer serializes")).unwrap();
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, e: serde_json::Error| TraceError::Line { line, msg: e.to_string() };
        let (line, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: Header = serde_json::from_str(first).map_err(|e| bad(line, e))?;
        if header.trace != TRACE_VERSION {
            return Err(TraceError::Version(header.trace));
        }
        header
            .config
            .validate()
            .map_err(|e| TraceError::Line { line, msg: e.to_string() })?;
        let rest: Vec<(usize, &str)> = lines.collect();
        let Some((&(fline, fl), body)) = rest.split_last() else {
            return Err(TraceError::MissingFooter);
        };
        let footer: Footer = serde_json::from_str(fl).map_err(|e| {
            if serde_json::from_str::<Event>(fl).is_ok() {
                TraceError::MissingFooter
            } else {
                bad(fline, e)
            }
        })?;
        let n = header.config.n;
        let mut events = Vec::with_capacity(body.len());
        let mut crashed = BTreeSet::new();
        for &(line, l) in body {
            let e: Event = serde_json::from_str(l).map_err(|e| bad(line, e))?;
            if e.pid.index() >= n {
                return Err(TraceError::UnknownProcess { line, pid: e.pid, n });
            }
            if let Some(prev) = events.last().map(|p: &Event| p.step) {
                if e.step <= prev {
                    return Err(TraceError::StepOrder { line, step: e.step, prev });
                }
            }
            if crashed.contains(&e.pid) {
                return Err(TraceError::AfterCrash { line, pid: e.pid });
            }
            if matches!(e.kind, EventKind::Crash { .. }) {
                crashed.insert(e.pid);
            }
            events.push(e);
        }
        Ok(Trace { config: header.config, events, footer })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SchedulePolicy;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            version: 1,
            n: 2,
            k: 1,
            seed: 0,
            schedule_policy: SchedulePolicy::RoundRobin,
            crash_plan: vec![],
            workload: vec![vec![], vec![]],
            step_budget: 10,
            oracle_policy: Default::default(),
        }
    }

    fn m(s: u32, i: u32) -> MessageId {
        MessageId::new(ProcessId::new(s), i)
    }

    fn sample() -> Trace {
        let p1 = ProcessId::new(1);
        let events = vec![
            Event {
                step: 0,
                pid: p1,
                kind: EventKind::Invoke(Operation::Broadcast { msg: m(1, 0), payload: Payload::Data("x".into()) }),
            },
            Event {
                step: 1,
                pid: p1,
                kind: EventKind::ObjectAccess(ObjectAccess {
                    object: ObjectId::Mem,
                    op: AccessOp::Write { value: Datum::Set([m(1, 0)].into_iter().collect()) },
                }),
            },
            Event {
                step: 2,
                pid: p1,
                kind: EventKind::ObjectAccess(ObjectAccess {
                    object: ObjectId::Ksa(0),
                    op: AccessOp::Propose { value: Datum::Msg(m(1, 0)), result: Datum::Msg(m(1, 0)) },
                }),
            },
            Event { step: 3, pid: ProcessId::new(2), kind: EventKind::Crash { tick: 2 } },
        ];
        Trace { config: cfg(), events, footer: Footer { outcome: Outcome::Quiescent, ticks: 4, max_wait: 1 } }
    }

    #[test]
    fn field_order_and_names_are_fixed() {
        let text = sample().to_jsonl();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[1],
            r#"{"step":0,"pid":1,"kind":"invoke","payload":{"op":"broadcast","msg":"1:0","payload":{"data":"x"}}}"#
        );
        assert_eq!(
            lines[2],
            r#"{"step":1,"pid":1,"kind":"object-access","payload":{"object":"mem","op":"write","value":["1:0"]}}"#
        );
        assert_eq!(lines[4], r#"{"step":3,"pid":2,"kind":"crash","payload":{"tick":2}}"#);
        assert_eq!(lines[5], r#"{"outcome":"quiescent","ticks":4,"max_wait":1}"#);
    }

    #[test]
    fn round_trips() {
        let t = sample();
        let back = Trace::from_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.faulty(), [ProcessId::new(2)].into_iter().collect());
    }

    #[test]
    fn corrupted_line_is_located() {
        let text = sample().to_jsonl().replace(r#""kind":"crash""#, r#""kind":"explode""#);
        let err = Trace::from_jsonl(&text).unwrap_err();
        assert!(matches!(err, TraceError::Line { line: 5, .. }), "{err}");
    }

    #[test]
    fn structural_invariants_are_enforced() {
        let text = sample().to_jsonl();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines.swap(1, 2);
        assert!(matches!(Trace::from_jsonl(&lines.join("\n")), Err(TraceError::StepOrder { line: 3, .. })));

        let mut t = sample();
        t.events.push(Event { step: 9, pid: ProcessId::new(2), kind: EventKind::Crash { tick: 5 } });
        assert!(matches!(Trace::from_jsonl(&t.to_jsonl()), Err(TraceError::AfterCrash { .. })));

        let truncated: Vec<_> = text.lines().take(4).collect();
        assert!(matches!(Trace::from_jsonl(&truncated.join("\n")), Err(TraceError::MissingFooter)));
    }
}
