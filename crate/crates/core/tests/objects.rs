use std::collections::BTreeSet;

use kbo_core::objects::{KsaOracle, OraclePolicy, SnapshotArray};
use kbo_core::ProcessId;
use proptest::prelude::*;

/// Every interleaving of `n` processes that each write once, then snapshot.
fn interleavings(n: usize, visit: &mut impl FnMut(&[usize])) {
    fn go(left: &mut [u8], acc: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if left.iter().all(|&l| l == 0) {
            visit(acc);
            return;
        }
        for p in 0..left.len() {
            if left[p] > 0 {
                left[p] -= 1;
                acc.push(p);
                go(left, acc, visit);
                acc.pop();
                left[p] += 1;
            }
        }
    }
    go(&mut vec![2; n], &mut Vec::new(), visit);
}

#[test]
fn one_shot_views_are_nested_over_all_interleavings() {
    let counts = [1, 6, 90, 2520];
    for n in 1..=4 {
        let mut seen = 0;
        interleavings(n, &mut |order| {
            seen += 1;
            let mut snap = SnapshotArray::one_shot(n);
            let mut wrote = vec![false; n];
            let mut views: Vec<(usize, BTreeSet<usize>)> = Vec::new();
            for &p in order {
                let pid = ProcessId::from_index(p);
                if wrote[p] {
                    let cells = snap.snapshot(pid).unwrap();
                    views.push((p, cells.iter().enumerate().filter(|(_, c)| c.is_some()).map(|(i, _)| i).collect()));
                } else {
                    snap.write(pid, p * 7).unwrap();
                    wrote[p] = true;
                }
            }
            for (p, v) in &views {
                assert!(v.contains(p), "{order:?}: p{p} misses its own write");
            }
            for (i, (_, a)) in views.iter().enumerate() {
                for (_, b) in &views[i + 1..] {
                    assert!(a.is_subset(b) || b.is_subset(a), "{order:?}: {a:?} vs {b:?}");
                }
            }
        });
        assert_eq!(seen, counts[n - 1]);
    }
}

#[test]
fn one_shot_discipline_is_enforced() {
    let p = ProcessId::new(1);
    let mut snap = SnapshotArray::one_shot(2);
    assert!(snap.snapshot(p).is_err());
    snap.write(p, 1).unwrap();
    assert!(snap.write(p, 2).is_err());
    snap.snapshot(p).unwrap();
    assert!(snap.snapshot(p).is_err());
}

#[derive(Clone, Debug)]
enum Op {
    Write(usize, u32),
    Snapshot(usize),
}

fn ops(n: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![(0..n, any::<u32>()).prop_map(|(p, v)| Op::Write(p, v)), (0..n).prop_map(Op::Snapshot)],
        0..40,
    )
}

fn policy() -> impl Strategy<Value = OraclePolicy> {
    prop_oneof![Just(OraclePolicy::FirstOne), Just(OraclePolicy::FirstKAdversarial)]
}

proptest! {
    #[test]
    fn multi_shot_snapshot_returns_the_latest_writes(ops in ops(4)) {
        let mut snap = SnapshotArray::multi_shot(4);
        let mut model: Vec<Option<u32>> = vec![None; 4];
        for op in ops {
            match op {
                Op::Write(p, v) => {
                    snap.write(ProcessId::from_index(p), v).unwrap();
                    model[p] = Some(v);
                }
                Op::Snapshot(p) => prop_assert_eq!(snap.snapshot(ProcessId::from_index(p)).unwrap(), model.clone()),
            }
        }
    }

    #[test]
    fn oracle_decisions_respect_agreement_and_validity(
        k in 1usize..4,
        seed in any::<u64>(),
        policy in policy(),
        proposals in prop::collection::vec((0u64..3, 0usize..5, 0u32..6), 1..30),
    ) {
        let mut oracle = KsaOracle::new(k, seed, policy);
        let mut last: Vec<Option<u64>> = vec![None; 5];
        let mut proposed: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); 3];
        let mut decided: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); 3];
        for (inst, p, v) in proposals {
            if last[p].is_some_and(|l| inst <= l) {
                continue;
            }
            last[p] = Some(inst);
            proposed[inst as usize].insert(v);
            let d = oracle.propose(inst, ProcessId::from_index(p), v).unwrap();
            decided[inst as usize].insert(d);
        }
        for i in 0..3 {
            prop_assert!(decided[i].len() <= k);
            prop_assert!(decided[i].is_subset(&proposed[i]));
        }
    }
}
