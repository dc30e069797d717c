//! k-SCD-broadcast from a multi-shot snapshot `MEM` and repeated K2S.
//!
//! Each process runs two automata over the shared [`KscdShared`] objects:
//! the broadcast operation (write, snapshot, then wait until everything seen
//! is delivered) and background task T, which runs one K2S round per
//! iteration and delivers one message set at the end of each round.
//!
//! Every shared-object operation is one step. Local computation is folded
//! into the step that precedes or follows it.

use std::collections::{BTreeSet, VecDeque};

use crate::k2s::{K2sAccess, K2sCall, K2sError, K2sOutput, RepeatedK2s};
use crate::model::{MessageId, ProcessId};
use crate::objects::{KsaOracle, ObjectError, SnapshotArray};
use crate::trace::{AccessOp, Datum, ObjectAccess, ObjectId};

pub type MsgSet = BTreeSet<MessageId>;

/// The objects shared by all processes.
#[derive(Clone, Debug)]
pub struct KscdShared {
    pub mem: SnapshotArray<MsgSet>,
    pub kss: RepeatedK2s<MessageId>,
}

impl KscdShared {
    pub fn new(n: usize, oracle: KsaOracle<MessageId>) -> Self {
        KscdShared { mem: SnapshotArray::multi_shot(n), kss: RepeatedK2s::new(n, oracle) }
    }

    /// Every message written to MEM so far.
    pub fn written(&self) -> MsgSet {
        self.mem.peek().iter().flatten().flatten().copied().collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KscdError {
    #[error("{pid} broadcasts {msg} while a broadcast is in progress")]
    Busy { pid: ProcessId, msg: MessageId },
    #[error("{pid} broadcasts {msg} twice")]
    Duplicate { pid: ProcessId, msg: MessageId },
    #[error("{pid} took a step with nothing to do")]
    NotEnabled { pid: ProcessId },
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    K2s(#[from] K2sError),
}

/// What a step did, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Access(ObjectAccess),
    Deliver { round: u64, msgs: MsgSet },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Broadcast {
    Idle,
    Write(MessageId),
    Snapshot(MessageId),
    Wait { msg: MessageId, todeliver1: MsgSet },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Task {
    Top,
    Round { r: u64, call: K2sCall<MessageId> },
}

/// Local state of one process.
#[derive(Clone, Debug)]
pub struct KscdProcess {
    pid: ProcessId,
    mem1: Vec<Option<MsgSet>>,
    delivered: MsgSet,
    seq: VecDeque<MsgSet>,
    broadcast: Broadcast,
    task: Task,
    own: BTreeSet<MessageId>,
}

impl KscdProcess {
    pub fn new(pid: ProcessId, n: usize) -> Self {
        KscdProcess {
            pid,
            mem1: vec![None; n],
            delivered: MsgSet::new(),
            seq: VecDeque::new(),
            broadcast: Broadcast::Idle,
            task: Task::Top,
            own: BTreeSet::new(),
        }
    }

    pub fn pid(&self) -> ProcessId {
        self.pid
    }

    pub fn delivered(&self) -> &MsgSet {
        &self.delivered
    }

    pub fn seq(&self) -> impl Iterator<Item = &MsgSet> {
        self.seq.iter()
    }

    /// Start `kscd_broadcast(m)`. The first step is the MEM write.
    pub fn begin_broadcast(&mut self, m: MessageId) -> Result<(), KscdError> {
        if self.broadcast != Broadcast::Idle {
            return Err(KscdError::Busy { pid: self.pid, msg: m });
        }
        if !self.own.insert(m) {
            return Err(KscdError::Duplicate { pid: self.pid, msg: m });
        }
        self.broadcast = Broadcast::Write(m);
        Ok(())
    }

    pub fn broadcasting(&self) -> Option<MessageId> {
        match &self.broadcast {
            Broadcast::Idle => None,
            Broadcast::Write(m) | Broadcast::Snapshot(m) | Broadcast::Wait { msg: m, .. } => Some(*m),
        }
    }

    /// The broadcast operation can take a step: a shared access is due, or
    /// the wait condition `todeliver1 ⊆ delivered` holds.
    pub fn broadcast_enabled(&self) -> bool {
        match &self.broadcast {
            Broadcast::Idle => false,
            Broadcast::Write(_) | Broadcast::Snapshot(_) => true,
            Broadcast::Wait { todeliver1, .. } => todeliver1.is_subset(&self.delivered),
        }
    }

    /// One step of the broadcast operation. Returns the message when the
    /// operation returns.
    pub fn broadcast_step(
        &mut self,
        shared: &mut KscdShared,
        out: &mut Vec<Effect>,
    ) -> Result<Option<MessageId>, KscdError> {
        match std::mem::replace(&mut self.broadcast, Broadcast::Idle) {
            Broadcast::Write(m) => {
                let mut mine = self.mem1[self.pid.index()].clone().unwrap_or_default();
                mine.insert(m);
                shared.mem.write(self.pid, mine.clone())?;
                out.push(access(ObjectId::Mem, AccessOp::Write { value: Datum::Set(mine) }));
                self.broadcast = Broadcast::Snapshot(m);
                Ok(None)
            }
            Broadcast::Snapshot(m) => {
                let snap = shared.mem.snapshot(self.pid)?;
                out.push(mem_snapshot(&snap));
                let todeliver1 = union(&snap).difference(&self.delivered).copied().collect();
                self.mem1 = snap;
                self.broadcast = Broadcast::Wait { msg: m, todeliver1 };
                Ok(None)
            }
            Broadcast::Wait { msg, todeliver1 } => {
                if !todeliver1.is_subset(&self.delivered) {
                    self.broadcast = Broadcast::Wait { msg, todeliver1 };
                    return Err(KscdError::NotEnabled { pid: self.pid });
                }
                Ok(Some(msg))
            }
            Broadcast::Idle => Err(KscdError::NotEnabled { pid: self.pid }),
        }
    }

    /// Task T has something to do: it is inside a round, `seq` is non-empty,
    /// or MEM holds a message not yet delivered here. Otherwise the process
    /// is idle as far as the task is concerned.
    pub fn task_enabled(&self, shared: &KscdShared) -> bool {
        match self.task {
            Task::Round { .. } => true,
            Task::Top => !self.seq.is_empty() || !shared.written().is_subset(&self.delivered),
        }
    }

    /// One step of task T.
    pub fn task_step(&mut self, shared: &mut KscdShared, out: &mut Vec<Effect>) -> Result<(), KscdError> {
        match std::mem::replace(&mut self.task, Task::Top) {
            Task::Top => {
                let prop = match self.seq.front() {
                    None => {
                        let snap = shared.mem.snapshot(self.pid)?;
                        out.push(mem_snapshot(&snap));
                        let todeliver2: MsgSet = union(&snap).difference(&self.delivered).copied().collect();
                        match todeliver2.first() {
                            Some(&m) => m,
                            None => return Ok(()),
                        }
                    }
                    Some(first) => *first.first().expect("seq holds no empty sets"),
                };
                let r = self.delivered.len() as u64;
                let mut call = K2sCall::new(r, self.pid, prop);
                if self.seq.front().is_some() {
                    // no shared access was made yet in this step
                    let (acc, _) = call.step(&mut shared.kss, None)?;
                    out.push(k2s_access(acc));
                }
                self.task = Task::Round { r, call };
                Ok(())
            }
            Task::Round { r, mut call } => {
                let (acc, done) = call.step(&mut shared.kss, None)?;
                out.push(k2s_access(acc));
                match done {
                    None => self.task = Task::Round { r, call },
                    Some(sets) => {
                        let first = self.finish_round(sets);
                        self.delivered.extend(first.iter().copied());
                        out.push(Effect::Deliver { round: r, msgs: first });
                    }
                }
                Ok(())
            }
        }
    }

    /// The local computation after `k2s_propose` returns: peel the views
    /// into a sequence of disjoint sets, smallest first, purge them from the
    /// old `seq`, prepend, and pop the head to deliver.
    fn finish_round(&mut self, sets: K2sOutput<MessageId>) -> MsgSet {
        let mut sets: Vec<MsgSet> = sets.sets.into_iter().collect();
        let mut new_seq = Vec::new();
        while sets.iter().any(|s| !s.is_empty()) {
            let min_len = sets.iter().map(|s| s.len()).filter(|&l| l > 0).min().unwrap();
            let mut mins = sets.iter().filter(|s| s.len() == min_len);
            let min_set = mins.next().unwrap().clone();
            assert!(mins.next().is_none(), "K2S views are not nested: two sets of size {min_len}");
            for s in &mut sets {
                *s = s.difference(&min_set).copied().collect();
            }
            sets.sort();
            sets.dedup();
            new_seq.push(min_set);
        }
        let aux: MsgSet = new_seq.iter().flatten().copied().collect();
        let old: Vec<MsgSet> = self.seq.drain(..).collect();
        self.seq = new_seq.into_iter().collect();
        for s in old {
            let s: MsgSet = s.difference(&aux).copied().collect();
            if !s.is_empty() {
                self.seq.push_back(s);
            }
        }
        self.seq.pop_front().expect("a K2S output holds at least one message")
    }
}

fn union(snap: &[Option<MsgSet>]) -> MsgSet {
    snap.iter().flatten().flatten().copied().collect()
}

fn access(object: ObjectId, op: AccessOp) -> Effect {
    Effect::Access(ObjectAccess { object, op })
}

fn mem_snapshot(snap: &[Option<MsgSet>]) -> Effect {
    let result = snap.iter().map(|c| c.clone().map(Datum::Set)).collect();
    access(ObjectId::Mem, AccessOp::Snapshot { result })
}

fn k2s_access(acc: K2sAccess<MessageId>) -> Effect {
    match acc {
        K2sAccess::Propose { round, value, decided } => access(
            ObjectId::Ksa(round),
            AccessOp::Propose { value: Datum::Msg(value), result: Datum::Msg(decided) },
        ),
        K2sAccess::Snap1Write { round, value } => {
            access(ObjectId::Snap1(round), AccessOp::Write { value: Datum::Msg(value) })
        }
        K2sAccess::Snap1Snapshot { round, cells } => access(
            ObjectId::Snap1(round),
            AccessOp::Snapshot { result: cells.into_iter().map(|c| c.map(Datum::Msg)).collect() },
        ),
        K2sAccess::Snap2Write { round, view } => {
            access(ObjectId::Snap2(round), AccessOp::Write { value: Datum::Set(view) })
        }
        K2sAccess::Snap2Snapshot { round, cells } => access(
            ObjectId::Snap2(round),
            AccessOp::Snapshot { result: cells.into_iter().map(|c| c.map(Datum::Set)).collect() },
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::OraclePolicy;

    fn m(s: u32, i: u32) -> MessageId {
        MessageId::new(ProcessId::new(s), i)
    }

    fn shared(n: usize, k: usize) -> KscdShared {
        KscdShared::new(n, KsaOracle::new(k, 0, OraclePolicy::FirstKAdversarial))
    }

    fn run_task(p: &mut KscdProcess, sh: &mut KscdShared) -> Vec<(u64, MsgSet)> {
        let mut delivered = Vec::new();
        while p.task_enabled(sh) {
            let mut out = Vec::new();
            p.task_step(sh, &mut out).unwrap();
            for e in out {
                if let Effect::Deliver { round, msgs } = e {
                    delivered.push((round, msgs));
                }
            }
        }
        delivered
    }

    #[test]
    fn solo_broadcast_delivers_own_message() {
        let mut sh = shared(1, 1);
        let mut p = KscdProcess::new(ProcessId::new(1), 1);
        let mut out = Vec::new();
        p.begin_broadcast(m(1, 0)).unwrap();
        p.broadcast_step(&mut sh, &mut out).unwrap();
        p.broadcast_step(&mut sh, &mut out).unwrap();
        assert!(!p.broadcast_enabled());
        let d = run_task(&mut p, &mut sh);
        assert_eq!(d, vec![(0, [m(1, 0)].into_iter().collect())]);
        assert!(p.broadcast_enabled());
        assert_eq!(p.broadcast_step(&mut sh, &mut out).unwrap(), Some(m(1, 0)));
        // write, snapshot, then task: ksa, snap1 w/r, snap2 w/r
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn single_undelivered_message_is_delivered_alone() {
        let mut sh = shared(2, 2);
        sh.mem.write(ProcessId::new(2), [m(2, 0)].into_iter().collect()).unwrap();
        let mut p = KscdProcess::new(ProcessId::new(1), 2);
        assert_eq!(run_task(&mut p, &mut sh), vec![(0, [m(2, 0)].into_iter().collect())]);
        assert!(!p.task_enabled(&sh));
    }

    #[test]
    fn rounds_follow_delivered_count() {
        let mut sh = shared(1, 1);
        let mut p = KscdProcess::new(ProcessId::new(1), 1);
        let msgs: MsgSet = (0..3).map(|i| m(1, i)).collect();
        sh.mem.write(ProcessId::new(1), msgs).unwrap();
        let d = run_task(&mut p, &mut sh);
        let rounds: Vec<u64> = d.iter().map(|(r, _)| *r).collect();
        assert_eq!(rounds, vec![0, 1, 2]);
        assert_eq!(p.delivered().len(), 3);
    }

    /// Two nested views {a} ⊂ {a, b} peel into [{a}, {b}]; the process
    /// delivers {a} now and keeps {b} queued, purged of anything already
    /// covered by the new sequence.
    #[test]
    fn peeling_produces_disjoint_sets_smallest_first() {
        let mut p = KscdProcess::new(ProcessId::new(1), 2);
        p.seq.push_back([m(2, 0), m(2, 1)].into_iter().collect());
        let out = K2sOutput {
            sets: [
                [m(1, 0)].into_iter().collect(),
                [m(1, 0), m(2, 0)].into_iter().collect(),
            ]
            .into_iter()
            .collect(),
        };
        let first = p.finish_round(out);
        assert_eq!(first, [m(1, 0)].into_iter().collect());
        let rest: Vec<MsgSet> = p.seq().cloned().collect();
        assert_eq!(rest, vec![[m(2, 0)].into_iter().collect(), [m(2, 1)].into_iter().collect()]);
    }

    #[test]
    fn emptied_sets_leave_seq() {
        let mut p = KscdProcess::new(ProcessId::new(1), 2);
        p.seq.push_back([m(2, 0)].into_iter().collect());
        let out = K2sOutput { sets: [[m(2, 0)].into_iter().collect()].into_iter().collect() };
        p.finish_round(out);
        assert_eq!(p.seq().count(), 0);
    }

    #[test]
    fn second_broadcast_while_busy_is_rejected() {
        let mut p = KscdProcess::new(ProcessId::new(1), 1);
        p.begin_broadcast(m(1, 0)).unwrap();
        assert!(matches!(p.begin_broadcast(m(1, 1)), Err(KscdError::Busy { .. })));
    }

    #[test]
    fn duplicate_identity_is_rejected() {
        let mut sh = shared(1, 1);
        let mut p = KscdProcess::new(ProcessId::new(1), 1);
        let mut out = Vec::new();
        p.begin_broadcast(m(1, 0)).unwrap();
        p.broadcast_step(&mut sh, &mut out).unwrap();
        p.broadcast_step(&mut sh, &mut out).unwrap();
        run_task(&mut p, &mut sh);
        p.broadcast_step(&mut sh, &mut out).unwrap();
        assert!(matches!(p.begin_broadcast(m(1, 0)), Err(KscdError::Duplicate { .. })));
    }
}
