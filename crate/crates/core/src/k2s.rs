//! K2S: one k-set agreement instance plus two one-shot snapshot objects,
//! returning a nested family of views.
//!
//! A call runs in five atomic steps, one per shared-object operation:
//!
//! 1. `val <- KSET.propose(r, v)`
//! 2. `SNAP1.write(val)`
//! 3. `snap1 <- SNAP1.snapshot()`, `view <- non-⊥ entries of snap1`
//! 4. `SNAP2.write(view)`
//! 5. `snap2 <- SNAP2.snapshot()`, return the non-⊥ entries of `snap2`
//!
//! Other processes may take steps between any two of them.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::ProcessId;
use crate::objects::{KsaOracle, ObjectError, OraclePolicy, SnapshotArray};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum K2sError {
    #[error("{pid} invoked K2S round {round} after round {last}")]
    RoundNotIncreasing { pid: ProcessId, round: u64, last: u64 },
    #[error("K2S call of {pid} already returned")]
    AlreadyReturned { pid: ProcessId },
    #[error(transparent)]
    Object(#[from] ObjectError),
}

/// The value returned by `k2s_propose`: a set of views, each a set of values.
/// Identical views collapse.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct K2sOutput<V: Ord> {
    pub sets: BTreeSet<BTreeSet<V>>,
}

impl<V: Ord + Clone> K2sOutput<V> {
    pub fn from_snapshot(cells: &[Option<BTreeSet<V>>]) -> Self {
        K2sOutput { sets: cells.iter().flatten().cloned().collect() }
    }

    /// Views sorted by size.
    pub fn chain(&self) -> Vec<&BTreeSet<V>> {
        let mut views: Vec<_> = self.sets.iter().collect();
        views.sort_by_key(|v| v.len());
        views
    }

    /// True iff the views, sorted by size, are ⊆-increasing.
    pub fn is_chain(&self) -> bool {
        self.chain().windows(2).all(|w| w[0].is_subset(w[1]))
    }

    pub fn is_subset(&self, other: &K2sOutput<V>) -> bool {
        self.sets.is_subset(&other.sets)
    }
}

#[derive(Clone, Debug)]
struct K2sInstance<V> {
    snap1: SnapshotArray<V>,
    snap2: SnapshotArray<BTreeSet<V>>,
}

/// Repeated K2S: instance `r` is created the first time any process uses it,
/// each with its own pair of one-shot snapshots. The k-set agreement part is
/// instance `r` of a shared repeated k-SA oracle.
#[derive(Clone, Debug)]
pub struct RepeatedK2s<V> {
    n: usize,
    oracle: KsaOracle<V>,
    instances: BTreeMap<u64, K2sInstance<V>>,
    last_round: BTreeMap<ProcessId, u64>,
}

/// One shared-object operation performed by a K2S call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum K2sAccess<V: Ord> {
    Propose { round: u64, value: V, decided: V },
    Snap1Write { round: u64, value: V },
    Snap1Snapshot { round: u64, cells: Vec<Option<V>> },
    Snap2Write { round: u64, view: BTreeSet<V> },
    Snap2Snapshot { round: u64, cells: Vec<Option<BTreeSet<V>>> },
}

impl<V: Clone + Ord> RepeatedK2s<V> {
    pub fn new(n: usize, oracle: KsaOracle<V>) -> Self {
        RepeatedK2s { n, oracle, instances: BTreeMap::new(), last_round: BTreeMap::new() }
    }

    pub fn with_policy(n: usize, k: usize, seed: u64, policy: OraclePolicy) -> Self {
        Self::new(n, KsaOracle::new(k, seed, policy))
    }

    pub fn oracle(&self) -> &KsaOracle<V> {
        &self.oracle
    }

    pub fn rounds(&self) -> impl Iterator<Item = u64> + '_ {
        self.instances.keys().copied()
    }

    fn instance(&mut self, round: u64) -> &mut K2sInstance<V> {
        let n = self.n;
        self.instances.entry(round).or_insert_with(|| K2sInstance {
            snap1: SnapshotArray::one_shot(n),
            snap2: SnapshotArray::one_shot(n),
        })
    }

    fn enter(&mut self, round: u64, pid: ProcessId) -> Result<(), K2sError> {
        if let Some(&last) = self.last_round.get(&pid) {
            if round <= last {
                return Err(K2sError::RoundNotIncreasing { pid, round, last });
            }
        }
        self.last_round.insert(pid, round);
        Ok(())
    }

    /// Runs a whole `k2s_propose(round, v)` without interruption.
    pub fn propose(&mut self, round: u64, pid: ProcessId, v: V) -> Result<K2sOutput<V>, K2sError> {
        let mut call = K2sCall::new(round, pid, v);
        loop {
            if let (_, Some(out)) = call.step(self, None)? {
                return Ok(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Phase<V: Ord> {
    Propose,
    WriteSnap1(V),
    SnapshotSnap1,
    WriteSnap2(BTreeSet<V>),
    SnapshotSnap2,
    Done,
}

/// An in-progress `k2s_propose(round, value)` by one process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct K2sCall<V: Ord> {
    pub round: u64,
    pub pid: ProcessId,
    pub value: V,
    phase: Phase<V>,
}

impl<V: Clone + Ord> K2sCall<V> {
    pub fn new(round: u64, pid: ProcessId, value: V) -> Self {
        K2sCall { round, pid, value, phase: Phase::Propose }
    }

    /// The next step is the k-set agreement proposal.
    pub fn at_propose(&self) -> bool {
        self.phase == Phase::Propose
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Execute the next step. `pick` overrides the oracle's choice at the
    /// proposal step (see [`KsaOracle::propose_choosing`]); `None` applies the
    /// configured policy.
    pub fn step(
        &mut self,
        store: &mut RepeatedK2s<V>,
        pick: Option<usize>,
    ) -> Result<(K2sAccess<V>, Option<K2sOutput<V>>), K2sError> {
        let (round, pid) = (self.round, self.pid);
        match std::mem::replace(&mut self.phase, Phase::Done) {
            Phase::Propose => {
                store.enter(round, pid)?;
                let v = self.value.clone();
                let decided = match pick {
                    Some(i) => store.oracle.propose_choosing(round, pid, v.clone(), i)?,
                    None => store.oracle.propose(round, pid, v.clone())?,
                };
                // make sure the instance exists even before anyone writes
                store.instance(round);
                self.phase = Phase::WriteSnap1(decided.clone());
                Ok((K2sAccess::Propose { round, value: v, decided }, None))
            }
            Phase::WriteSnap1(val) => {
                store.instance(round).snap1.write(pid, val.clone())?;
                self.phase = Phase::SnapshotSnap1;
                Ok((K2sAccess::Snap1Write { round, value: val }, None))
            }
            Phase::SnapshotSnap1 => {
                let cells = store.instance(round).snap1.snapshot(pid)?;
                let view: BTreeSet<V> = cells.iter().flatten().cloned().collect();
                self.phase = Phase::WriteSnap2(view);
                Ok((K2sAccess::Snap1Snapshot { round, cells }, None))
            }
            Phase::WriteSnap2(view) => {
                store.instance(round).snap2.write(pid, view.clone())?;
                self.phase = Phase::SnapshotSnap2;
                Ok((K2sAccess::Snap2Write { round, view }, None))
            }
            Phase::SnapshotSnap2 => {
                let cells = store.instance(round).snap2.snapshot(pid)?;
                let out = K2sOutput::from_snapshot(&cells);
                Ok((K2sAccess::Snap2Snapshot { round, cells }, Some(out)))
            }
            Phase::Done => Err(K2sError::AlreadyReturned { pid }),
        }
    }
}

/// Outcome of one single-instance K2S execution.
#[derive(Clone, Debug)]
pub struct K2sRun<V: Ord> {
    pub k: usize,
    pub proposals: BTreeMap<ProcessId, V>,
    pub outputs: BTreeMap<ProcessId, K2sOutput<V>>,
    pub crashed: BTreeSet<ProcessId>,
    /// Every shared-object step, in execution order.
    pub accesses: Vec<(ProcessId, K2sAccess<V>)>,
}

impl<V: Ord + Clone> K2sRun<V> {
    /// Distinct values proposed to the instance.
    pub fn inputs(&self) -> BTreeSet<V> {
        self.proposals.values().cloned().collect()
    }
}

/// Run one K2S instance (round 0) under a seeded random interleaving. Each
/// live process crashes before any given step with probability
/// `crash_per_mille / 1000`, but at least one process always survives.
pub fn run_single_instance<V: Clone + Ord>(
    n: usize,
    k: usize,
    proposals: &[(ProcessId, V)],
    policy: OraclePolicy,
    seed: u64,
    crash_per_mille: usize,
) -> Result<K2sRun<V>, K2sError> {
    let mut rng = SplitMix64::new(seed);
    let mut store = RepeatedK2s::with_policy(n, k, seed, policy);
    let mut calls: Vec<K2sCall<V>> =
        proposals.iter().map(|(p, v)| K2sCall::new(0, *p, v.clone())).collect();
    let mut run = K2sRun {
        k,
        proposals: proposals.iter().cloned().collect(),
        outputs: BTreeMap::new(),
        crashed: BTreeSet::new(),
        accesses: Vec::new(),
    };
    loop {
        let live: Vec<usize> = (0..calls.len())
            .filter(|&i| !calls[i].is_done() && !run.crashed.contains(&calls[i].pid))
            .collect();
        if live.is_empty() {
            return Ok(run);
        }
        let i = live[rng.below(live.len())];
        let pid = calls[i].pid;
        let survivors = calls.len() - run.crashed.len();
        if survivors > 1 && rng.below(1000) < crash_per_mille {
            run.crashed.insert(pid);
            continue;
        }
        let (access, out) = calls[i].step(&mut store, None)?;
        run.accesses.push((pid, access));
        if let Some(out) = out {
            run.outputs.insert(pid, out);
        }
    }
}

/// Visit every execution of one K2S instance: all interleavings of the
/// processes' steps, and at each k-SA proposal every decision the oracle's
/// policy allows. Returns the number of executions visited.
pub fn explore_single_instance<V: Clone + Ord>(
    n: usize,
    k: usize,
    proposals: &[(ProcessId, V)],
    policy: OraclePolicy,
    visit: &mut impl FnMut(&K2sRun<V>),
) -> Result<u64, K2sError> {
    #[derive(Clone)]
    struct Node<V: Ord> {
        store: RepeatedK2s<V>,
        calls: Vec<K2sCall<V>>,
        run: K2sRun<V>,
    }

    fn go<V: Clone + Ord>(
        node: Node<V>,
        visit: &mut impl FnMut(&K2sRun<V>),
        count: &mut u64,
    ) -> Result<(), K2sError> {
        let pending: Vec<usize> = (0..node.calls.len()).filter(|&i| !node.calls[i].is_done()).collect();
        if pending.is_empty() {
            *count += 1;
            visit(&node.run);
            return Ok(());
        }
        for i in pending {
            let call = &node.calls[i];
            let picks = if call.at_propose() {
                node.store.oracle().candidates(call.round, &call.value).len()
            } else {
                1
            };
            for pick in 0..picks {
                let mut next = node.clone();
                let pid = next.calls[i].pid;
                let (access, out) = next.calls[i].step(&mut next.store, Some(pick))?;
                next.run.accesses.push((pid, access));
                if let Some(out) = out {
                    next.run.outputs.insert(pid, out);
                }
                go(next, visit, count)?;
            }
        }
        Ok(())
    }

    let root = Node {
        store: RepeatedK2s::with_policy(n, k, 0, policy),
        calls: proposals.iter().map(|(p, v)| K2sCall::new(0, *p, v.clone())).collect(),
        run: K2sRun {
            k,
            proposals: proposals.iter().cloned().collect(),
            outputs: BTreeMap::new(),
            crashed: BTreeSet::new(),
            accesses: Vec::new(),
        },
    };
    let mut count = 0;
    go(root, visit, &mut count)?;
    Ok(count)
}
