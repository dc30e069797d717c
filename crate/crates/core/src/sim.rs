//! The deterministic scheduler.
//!
//! Each tick the scheduler applies the crashes planned for that tick, picks
//! one enabled `(process, lane)` pair according to the schedule policy, and
//! runs one atomic step of it. A process has two lanes: its workload
//! operations (broadcast and propose) and background task T. The run stops
//! when nothing is enabled (quiescent) or when the step budget is spent.
//!
//! Under `seeded-random` a process that has been enabled but unscheduled for
//! `3n` consecutive ticks is scheduled next, oldest first, so every enabled
//! process runs at least once in any window of `4n` ticks.

use std::collections::{BTreeMap, VecDeque};

use crate::kbo::{self, Message, Payload};
use crate::kscd::{Effect, KscdError, KscdProcess, KscdShared};
use crate::ksa::DecisionsTable;
use crate::model::{MessageId, ProcessId};
use crate::objects::KsaOracle;
use crate::rng::{derive, SplitMix64};
use crate::scenario::{ConfigError, Lane, ScenarioConfig, SchedulePolicy, WorkItem};
use crate::trace::{Event, EventKind, Footer, Operation, Outcome, Trace};

/// A process is forced after waiting this many multiples of `n` ticks.
pub const STARVATION_FACTOR: u64 = 3;
/// Fairness window, in multiples of `n`.
pub const FAIRNESS_WINDOW: u64 = STARVATION_FACTOR + 1;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("{0} has already crashed")]
    DoubleCrash(ProcessId),
    #[error("protocol violation: {0}")]
    Protocol(#[from] KscdError),
}

#[derive(Clone, Debug)]
enum Op {
    Idle,
    Broadcast { msg: Message, proposal: Option<u64> },
    AwaitDecision { instance: u64 },
}

#[derive(Clone, Debug)]
struct Proc {
    kscd: KscdProcess,
    decisions: DecisionsTable,
    work: VecDeque<WorkItem>,
    next_index: u32,
    op: Op,
    crashed: bool,
    position: usize,
}

impl Proc {
    fn fg_enabled(&self) -> bool {
        match &self.op {
            Op::Idle => !self.work.is_empty(),
            Op::Broadcast { .. } => self.kscd.broadcast_enabled(),
            Op::AwaitDecision { instance } => self.decisions.ready(*instance),
        }
    }
}

pub struct Simulation {
    config: ScenarioConfig,
    shared: KscdShared,
    procs: Vec<Proc>,
    payloads: BTreeMap<MessageId, Payload>,
    events: Vec<Event>,
    rng: SplitMix64,
    tick: u64,
    waits: Vec<u64>,
    max_wait: u64,
    script_pos: usize,
    rr_cursor: usize,
}

/// Run a scenario to quiescence or budget exhaustion.
pub fn run(config: &ScenarioConfig) -> Result<Trace, SimError> {
    Simulation::new(config)?.run_to_end()
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n;
        let oracle = KsaOracle::new(config.k, derive(config.seed, &[1]), config.oracle_policy);
        let procs = ProcessId::all(n)
            .map(|pid| Proc {
                kscd: KscdProcess::new(pid, n),
                decisions: DecisionsTable::new(),
                work: config.workload[pid.index()].iter().cloned().collect(),
                next_index: 0,
                op: Op::Idle,
                crashed: false,
                position: 0,
            })
            .collect();
        Ok(Simulation {
            config: config.clone(),
            shared: KscdShared::new(n, oracle),
            procs,
            payloads: BTreeMap::new(),
            events: Vec::new(),
            rng: SplitMix64::new(derive(config.seed, &[0])),
            tick: 0,
            waits: vec![0; n],
            max_wait: 0,
            script_pos: 0,
            rr_cursor: 0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Crash `pid` now: it takes no further step.
    pub fn inject_crash(&mut self, pid: ProcessId) -> Result<(), SimError> {
        let proc = &mut self.procs[pid.index()];
        if proc.crashed {
            return Err(SimError::DoubleCrash(pid));
        }
        proc.crashed = true;
        self.waits[pid.index()] = 0;
        self.emit(pid, EventKind::Crash { tick: self.tick });
        Ok(())
    }

    /// Every `(process, lane)` that can take a step.
    pub fn enabled(&self) -> Vec<(ProcessId, Lane)> {
        let mut out = Vec::new();
        for (i, p) in self.procs.iter().enumerate() {
            if p.crashed {
                continue;
            }
            let pid = ProcessId::from_index(i);
            if p.fg_enabled() {
                out.push((pid, Lane::Foreground));
            }
            if p.kscd.task_enabled(&self.shared) {
                out.push((pid, Lane::Background));
            }
        }
        out
    }

    /// Run one tick. Returns false, without consuming the tick, when nothing
    /// is enabled.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let due: Vec<ProcessId> = self
            .config
            .crash_plan
            .iter()
            .filter(|c| c.step == self.tick && !self.procs[c.pid.index()].crashed)
            .map(|c| c.pid)
            .collect();
        for pid in due {
            self.inject_crash(pid)?;
        }
        let enabled = self.enabled();
        if enabled.is_empty() {
            return Ok(false);
        }
        let (pid, lane) = self.choose(&enabled);
        for (i, w) in self.waits.iter_mut().enumerate() {
            let pi = ProcessId::from_index(i);
            if pi == pid || !enabled.iter().any(|(q, _)| *q == pi) {
                *w = 0;
            } else {
                *w += 1;
                self.max_wait = self.max_wait.max(*w);
            }
        }
        match lane {
            Lane::Foreground => self.foreground(pid)?,
            Lane::Background => self.background(pid)?,
        }
        self.tick += 1;
        Ok(true)
    }

    pub fn run_to_end(mut self) -> Result<Trace, SimError> {
        let mut outcome = Outcome::BudgetExhausted;
        while self.tick < self.config.step_budget {
            if !self.step()? {
                outcome = Outcome::Quiescent;
                break;
            }
        }
        if outcome == Outcome::BudgetExhausted && self.enabled().is_empty() {
            outcome = Outcome::Quiescent;
        }
        let footer = Footer { outcome, ticks: self.tick, max_wait: self.max_wait };
        Ok(Trace { config: self.config, events: self.events, footer })
    }

    fn choose(&mut self, enabled: &[(ProcessId, Lane)]) -> (ProcessId, Lane) {
        match &self.config.schedule_policy {
            SchedulePolicy::SeededRandom => {
                let mut pids: Vec<ProcessId> = enabled.iter().map(|e| e.0).collect();
                pids.dedup();
                let limit = STARVATION_FACTOR * self.config.n as u64;
                let starved = pids
                    .iter()
                    .copied()
                    .filter(|p| self.waits[p.index()] >= limit)
                    .max_by_key(|p| (self.waits[p.index()], std::cmp::Reverse(*p)));
                let pid = starved.unwrap_or_else(|| pids[self.rng.below(pids.len())]);
                let lanes: Vec<Lane> = enabled.iter().filter(|e| e.0 == pid).map(|e| e.1).collect();
                (pid, lanes[self.rng.below(lanes.len())])
            }
            SchedulePolicy::RoundRobin => self.round_robin(enabled),
            SchedulePolicy::Scripted(script) => {
                while let Some(entry) = script.get(self.script_pos) {
                    self.script_pos += 1;
                    let hit = enabled
                        .iter()
                        .find(|(p, l)| *p == entry.pid && entry.lane.is_none_or(|want| want == *l));
                    if let Some(&hit) = hit {
                        return hit;
                    }
                }
                self.round_robin(enabled)
            }
        }
    }

    fn round_robin(&mut self, enabled: &[(ProcessId, Lane)]) -> (ProcessId, Lane) {
        let slots = 2 * self.config.n;
        for off in 0..slots {
            let slot = (self.rr_cursor + off) % slots;
            let want = (
                ProcessId::from_index(slot / 2),
                if slot.is_multiple_of(2) { Lane::Foreground } else { Lane::Background },
            );
            if enabled.contains(&want) {
                self.rr_cursor = slot + 1;
                return want;
            }
        }
        unreachable!("round_robin called with nothing enabled")
    }

    fn emit(&mut self, pid: ProcessId, kind: EventKind) {
        let step = self.events.len() as u64;
        self.events.push(Event { step, pid, kind });
    }

    fn foreground(&mut self, pid: ProcessId) -> Result<(), SimError> {
        let i = pid.index();
        match self.procs[i].op.clone() {
            Op::Idle => {
                let item = self.procs[i].work.pop_front().expect("foreground enabled with no work");
                let id = MessageId::new(pid, self.procs[i].next_index);
                self.procs[i].next_index += 1;
                let (payload, proposal) = match item {
                    WorkItem::Broadcast(v) => (Payload::Data(v), None),
                    WorkItem::Propose { instance, value } => {
                        self.emit(pid, EventKind::Invoke(Operation::Propose { instance, value: value.clone() }));
                        (Payload::Proposal { instance, value }, Some(instance))
                    }
                };
                self.emit(pid, EventKind::Invoke(Operation::Broadcast { msg: id, payload: payload.clone() }));
                self.payloads.insert(id, payload.clone());
                let proc = &mut self.procs[i];
                proc.kscd.begin_broadcast(id)?;
                proc.op = Op::Broadcast { msg: Message { id, payload }, proposal };
                let mut out = Vec::new();
                proc.kscd.broadcast_step(&mut self.shared, &mut out)?;
                self.apply(pid, out);
            }
            Op::Broadcast { msg, proposal } => {
                let mut out = Vec::new();
                let done = self.procs[i].kscd.broadcast_step(&mut self.shared, &mut out)?;
                self.apply(pid, out);
                if done.is_some() {
                    self.emit(pid, EventKind::Return(Operation::Broadcast { msg: msg.id, payload: msg.payload }));
                    self.procs[i].op = Op::Idle;
                    if let Some(instance) = proposal {
                        self.procs[i].op = Op::AwaitDecision { instance };
                        self.try_decide(pid, instance);
                    }
                }
            }
            Op::AwaitDecision { instance } => self.try_decide(pid, instance),
        }
        Ok(())
    }

    fn try_decide(&mut self, pid: ProcessId, instance: u64) {
        if let Some(value) = self.procs[pid.index()].decisions.take(instance) {
            self.procs[pid.index()].op = Op::Idle;
            self.emit(pid, EventKind::Decide { instance, value });
        }
    }

    fn background(&mut self, pid: ProcessId) -> Result<(), SimError> {
        let mut out = Vec::new();
        self.procs[pid.index()].kscd.task_step(&mut self.shared, &mut out)?;
        self.apply(pid, out);
        Ok(())
    }

    fn apply(&mut self, pid: ProcessId, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Access(a) => self.emit(pid, EventKind::ObjectAccess(a)),
                Effect::Deliver { round, msgs } => {
                    let unpacked = kbo::on_kscd_deliver(&msgs);
                    self.emit(pid, EventKind::DeliverSet { round, msgs });
                    for msg in unpacked {
                        let payload = self.payloads[&msg].clone();
                        let proc = &mut self.procs[pid.index()];
                        let position = proc.position;
                        proc.position += 1;
                        if let Payload::Proposal { instance, value } = &payload {
                            proc.decisions.on_kbo_deliver(*instance, value.clone());
                        }
                        self.emit(pid, EventKind::DeliverMsg { msg, position, payload });
                    }
                }
            }
        }
    }
}
