//! Primitive shared objects: atomic snapshot arrays and a repeated k-set
//! agreement oracle.
//!
//! Every operation here is executed by the scheduler as one indivisible step,
//! so linearizability holds by construction: the linearization point of an
//! operation is the step that executes it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::ProcessId;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObjectError {
    #[error("{pid} wrote twice to a one-shot snapshot object")]
    OneShotDoubleWrite { pid: ProcessId },
    #[error("{pid} took a one-shot snapshot before writing")]
    OneShotSnapshotBeforeWrite { pid: ProcessId },
    #[error("{pid} took a second one-shot snapshot")]
    OneShotDoubleSnapshot { pid: ProcessId },
    #[error("{pid} proposed to k-SA instance {instance} after instance {last}")]
    NonIncreasingInstance { pid: ProcessId, instance: u64, last: u64 },
    #[error("{pid} is outside the object's {n} slots")]
    UnknownProcess { pid: ProcessId, n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotMode {
    MultiShot,
    OneShot,
}

/// `REG[1..n]`: one single-writer cell per process, read all at once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotArray<T> {
    cells: Vec<Option<T>>,
    mode: SnapshotMode,
    wrote: Vec<bool>,
    snapped: Vec<bool>,
}

impl<T: Clone> SnapshotArray<T> {
    pub fn new(n: usize, mode: SnapshotMode) -> Self {
        SnapshotArray {
            cells: vec![None; n],
            mode,
            wrote: vec![false; n],
            snapped: vec![false; n],
        }
    }

    pub fn multi_shot(n: usize) -> Self {
        Self::new(n, SnapshotMode::MultiShot)
    }

    pub fn one_shot(n: usize) -> Self {
        Self::new(n, SnapshotMode::OneShot)
    }

    pub fn mode(&self) -> SnapshotMode {
        self.mode
    }

    fn slot(&self, pid: ProcessId) -> Result<usize, ObjectError> {
        let i = pid.index();
        if i < self.cells.len() {
            Ok(i)
        } else {
            Err(ObjectError::UnknownProcess { pid, n: self.cells.len() })
        }
    }

    /// `write(v)` by `pid`: assigns `v` to `REG[pid]`.
    pub fn write(&mut self, pid: ProcessId, v: T) -> Result<(), ObjectError> {
        let i = self.slot(pid)?;
        if self.mode == SnapshotMode::OneShot && self.wrote[i] {
            return Err(ObjectError::OneShotDoubleWrite { pid });
        }
        self.wrote[i] = true;
        self.cells[i] = Some(v);
        Ok(())
    }

    /// `snapshot()` by `pid`: a copy of the whole array.
    pub fn snapshot(&mut self, pid: ProcessId) -> Result<Vec<Option<T>>, ObjectError> {
        let i = self.slot(pid)?;
        if self.mode == SnapshotMode::OneShot {
            if !self.wrote[i] {
                return Err(ObjectError::OneShotSnapshotBeforeWrite { pid });
            }
            if self.snapped[i] {
                return Err(ObjectError::OneShotDoubleSnapshot { pid });
            }
            self.snapped[i] = true;
        }
        Ok(self.cells.clone())
    }

    /// Current cells, without counting as an operation.
    pub fn peek(&self) -> &[Option<T>] {
        &self.cells
    }
}

/// The non-⊥ entries of a snapshot, tagged with their writer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct View<T: Ord> {
    pub entries: BTreeMap<ProcessId, T>,
}

impl<T: Ord + Clone> View<T> {
    pub fn from_snapshot(cells: &[Option<T>]) -> Self {
        let entries = cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|v| (ProcessId::from_index(i), v.clone())))
            .collect();
        View { entries }
    }

    pub fn is_subset(&self, other: &View<T>) -> bool {
        self.entries.iter().all(|(p, v)| other.entries.get(p) == Some(v))
    }

    /// Pairwise containment: one of the two views includes the other.
    pub fn comparable(&self, other: &View<T>) -> bool {
        self.is_subset(other) || other.is_subset(self)
    }

    /// The distinct values of the view, forgetting writers.
    pub fn values(&self) -> BTreeSet<T> {
        self.entries.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// How the oracle picks each process's decision. The oracle stands in for a
/// k-set agreement object, which cannot itself be built wait-free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum OraclePolicy {
    /// Everyone decides the first value proposed to the instance.
    #[serde(rename = "first-1")]
    FirstOne,
    /// Each decision is a seeded pick among the first `min(k, distinct)`
    /// distinct values proposed so far.
    #[default]
    FirstKAdversarial,
    /// Everyone decides its own proposal. Only legal when `k = n`.
    Echo,
    /// Like `FirstKAdversarial` with `k + 1` candidates. Violates k-set
    /// agreement on purpose; used to show the checker notices.
    Permissive,
}

/// One k-set agreement instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KsaInstance<V> {
    pub instance_no: u64,
    /// Proposals in arrival order.
    pub proposals: Vec<(ProcessId, V)>,
    pub decisions: BTreeMap<ProcessId, V>,
}

impl<V: Clone + Ord> KsaInstance<V> {
    fn new(instance_no: u64) -> Self {
        KsaInstance { instance_no, proposals: Vec::new(), decisions: BTreeMap::new() }
    }

    /// Distinct proposed values in order of first arrival.
    pub fn distinct_in_arrival_order(&self) -> Vec<V> {
        let mut seen = BTreeSet::new();
        self.proposals
            .iter()
            .filter(|(_, v)| seen.insert(v.clone()))
            .map(|(_, v)| v.clone())
            .collect()
    }

    pub fn distinct_decisions(&self) -> BTreeSet<V> {
        self.decisions.values().cloned().collect()
    }
}

/// A repeated k-set agreement object. Instances are created on first use.
#[derive(Clone, Debug)]
pub struct KsaOracle<V> {
    k: usize,
    seed: u64,
    policy: OraclePolicy,
    instances: BTreeMap<u64, KsaInstance<V>>,
    last_instance: BTreeMap<ProcessId, u64>,
}

impl<V: Clone + Ord> KsaOracle<V> {
    pub fn new(k: usize, seed: u64, policy: OraclePolicy) -> Self {
        KsaOracle { k, seed, policy, instances: BTreeMap::new(), last_instance: BTreeMap::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn policy(&self) -> OraclePolicy {
        self.policy
    }

    pub fn instance(&self, instance_no: u64) -> Option<&KsaInstance<V>> {
        self.instances.get(&instance_no)
    }

    pub fn instances(&self) -> impl Iterator<Item = &KsaInstance<V>> {
        self.instances.values()
    }

    fn admit(&self, instance_no: u64, pid: ProcessId) -> Result<(), ObjectError> {
        match self.last_instance.get(&pid) {
            Some(&last) if instance_no <= last => {
                Err(ObjectError::NonIncreasingInstance { pid, instance: instance_no, last })
            }
            _ => Ok(()),
        }
    }

    /// Values `pid` may decide if it proposes `v` now: the candidate list the
    /// policy picks from, in arrival order.
    pub fn candidates(&self, instance_no: u64, v: &V) -> Vec<V> {
        let mut distinct = self
            .instances
            .get(&instance_no)
            .map(|i| i.distinct_in_arrival_order())
            .unwrap_or_default();
        if !distinct.contains(v) {
            distinct.push(v.clone());
        }
        let limit = match self.policy {
            OraclePolicy::FirstOne => 1,
            OraclePolicy::FirstKAdversarial => self.k,
            OraclePolicy::Permissive => self.k + 1,
            OraclePolicy::Echo => return vec![v.clone()],
        };
        distinct.truncate(limit.max(1));
        distinct
    }

    /// `propose(instance_no, v)` by `pid`, decided by the configured policy.
    pub fn propose(&mut self, instance_no: u64, pid: ProcessId, v: V) -> Result<V, ObjectError> {
        let candidates = self.candidates(instance_no, &v);
        let pick = match self.policy {
            OraclePolicy::FirstKAdversarial | OraclePolicy::Permissive => {
                let s = rng::derive(self.seed, &[instance_no, pid.get() as u64]);
                rng::SplitMix64::new(s).below(candidates.len())
            }
            OraclePolicy::FirstOne | OraclePolicy::Echo => 0,
        };
        self.propose_choosing(instance_no, pid, v, pick)
    }

    /// Like [`propose`](Self::propose) but with the decision picked by the
    /// caller, as an index into [`candidates`](Self::candidates). Used by
    /// exhaustive exploration.
    pub fn propose_choosing(
        &mut self,
        instance_no: u64,
        pid: ProcessId,
        v: V,
        pick: usize,
    ) -> Result<V, ObjectError> {
        self.admit(instance_no, pid)?;
        let candidates = self.candidates(instance_no, &v);
        let decision = candidates[pick.min(candidates.len() - 1)].clone();
        self.last_instance.insert(pid, instance_no);
        let inst = self.instances.entry(instance_no).or_insert_with(|| KsaInstance::new(instance_no));
        inst.proposals.push((pid, v));
        inst.decisions.insert(pid, decision.clone());
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u32) -> ProcessId {
        ProcessId::new(i)
    }

    #[test]
    fn write_then_snapshot_sees_own_value() {
        let mut s = SnapshotArray::multi_shot(3);
        s.write(p(2), "v").unwrap();
        let cells = s.snapshot(p(2)).unwrap();
        assert_eq!(cells, vec![None, Some("v"), None]);
    }

    #[test]
    fn multi_shot_overwrite_is_visible() {
        let mut s = SnapshotArray::multi_shot(2);
        s.write(p(1), 1).unwrap();
        s.write(p(1), 2).unwrap();
        assert_eq!(s.snapshot(p(2)).unwrap()[0], Some(2));
    }

    #[test]
    fn multi_shot_snapshot_before_any_write_is_all_bottom() {
        let mut s: SnapshotArray<u8> = SnapshotArray::multi_shot(4);
        assert!(s.snapshot(p(3)).unwrap().iter().all(Option::is_none));
    }

    #[test]
    fn one_shot_protocol_errors() {
        let mut s = SnapshotArray::one_shot(2);
        assert_eq!(s.snapshot(p(1)), Err(ObjectError::OneShotSnapshotBeforeWrite { pid: p(1) }));
        s.write(p(1), 'a').unwrap();
        assert_eq!(s.write(p(1), 'b'), Err(ObjectError::OneShotDoubleWrite { pid: p(1) }));
        s.snapshot(p(1)).unwrap();
        assert_eq!(s.snapshot(p(1)), Err(ObjectError::OneShotDoubleSnapshot { pid: p(1) }));
    }

    #[test]
    fn sequential_one_shot_views_grow_in_write_order() {
        let mut s = SnapshotArray::one_shot(3);
        let mut sizes = Vec::new();
        for i in 1..=3 {
            s.write(p(i), i).unwrap();
            sizes.push(View::from_snapshot(&s.snapshot(p(i)).unwrap()).len());
        }
        assert_eq!(sizes, vec![1, 2, 3]);
    }

    #[test]
    fn interleaved_one_shot_writers_are_nested() {
        let mut s = SnapshotArray::one_shot(2);
        s.write(p(1), 'a').unwrap();
        let v1 = View::from_snapshot(&s.snapshot(p(1)).unwrap());
        s.write(p(2), 'b').unwrap();
        let v2 = View::from_snapshot(&s.snapshot(p(2)).unwrap());
        assert!(v1.is_subset(&v2));
        assert_eq!(v2.values(), ['a', 'b'].into_iter().collect());
    }

    /// All interleavings of `write; snapshot` for `n` one-shot processes.
    fn interleavings(remaining: &mut Vec<u8>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(prefix.clone());
            return;
        }
        for i in 0..remaining.len() {
            if remaining[i] > 0 {
                remaining[i] -= 1;
                prefix.push(i);
                interleavings(remaining, prefix, out);
                prefix.pop();
                remaining[i] += 1;
            }
        }
    }

    #[test]
    fn one_shot_containment_exhaustive_up_to_four_processes() {
        for n in 1..=4usize {
            let mut all = Vec::new();
            interleavings(&mut vec![2; n], &mut Vec::new(), &mut all);
            // (2n)! / 2^n schedules
            let expected: usize = (1..=2 * n).product::<usize>() / 2usize.pow(n as u32);
            assert_eq!(all.len(), expected);
            for schedule in all {
                let mut s = SnapshotArray::one_shot(n);
                let mut wrote = vec![false; n];
                let mut views = Vec::new();
                for i in schedule {
                    let pid = ProcessId::from_index(i);
                    if wrote[i] {
                        views.push(View::from_snapshot(&s.snapshot(pid).unwrap()));
                    } else {
                        s.write(pid, i).unwrap();
                        wrote[i] = true;
                    }
                }
                for a in &views {
                    for b in &views {
                        assert!(a.comparable(b));
                    }
                }
            }
        }
    }

    #[test]
    fn consensus_policy_gives_everyone_the_first_arrival() {
        let mut o = KsaOracle::new(1, 0, OraclePolicy::FirstKAdversarial);
        let d: Vec<_> = ["a", "b", "c"]
            .iter()
            .enumerate()
            .map(|(i, v)| o.propose(0, ProcessId::from_index(i), *v).unwrap())
            .collect();
        assert_eq!(d, vec!["a", "a", "a"]);
    }

    #[test]
    fn echo_returns_own_proposal() {
        let mut o = KsaOracle::new(3, 0, OraclePolicy::Echo);
        for (i, v) in ["a", "b", "c"].iter().enumerate() {
            assert_eq!(o.propose(0, ProcessId::from_index(i), *v).unwrap(), *v);
        }
    }

    #[test]
    fn first_k_adversarial_draws_from_first_two_arrivals() {
        for seed in 0..64 {
            let mut o = KsaOracle::new(2, seed, OraclePolicy::FirstKAdversarial);
            let d: Vec<_> = ["a", "b", "c"]
                .iter()
                .enumerate()
                .map(|(i, v)| o.propose(0, ProcessId::from_index(i), *v).unwrap())
                .collect();
            // the first proposer can only see its own value
            assert_eq!(d[0], "a");
            assert!(d.iter().all(|v| *v == "a" || *v == "b"), "seed {seed}: {d:?}");
            assert!(o.instance(0).unwrap().distinct_decisions().len() <= 2);
        }
    }

    #[test]
    fn first_k_adversarial_actually_disagrees_for_some_seed() {
        let disagree = (0..64).any(|seed| {
            let mut o = KsaOracle::new(2, seed, OraclePolicy::FirstKAdversarial);
            o.propose(0, p(1), "a").unwrap();
            o.propose(0, p(2), "b").unwrap() == "b"
        });
        assert!(disagree);
    }

    #[test]
    fn instances_must_increase_per_process() {
        let mut o = KsaOracle::new(2, 0, OraclePolicy::FirstOne);
        o.propose(3, p(1), 'x').unwrap();
        // other processes may use different sub-sequences
        o.propose(1, p(2), 'y').unwrap();
        assert_eq!(
            o.propose(3, p(1), 'z'),
            Err(ObjectError::NonIncreasingInstance { pid: p(1), instance: 3, last: 3 })
        );
        assert!(o.propose(2, p(1), 'z').is_err());
        assert_eq!(o.propose(9, p(1), 'z').unwrap(), 'z');
    }
}
