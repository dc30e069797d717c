//! Reference implementations used as independent oracles by the
//! integration tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kbo_core::rng::SplitMix64;
use kbo_core::trace::Trace;
use kbo_core::MessageId;

/// Strict order as a closed relation matrix: `lt[a][b]` iff `a < b`.
#[derive(Clone, Debug)]
pub struct Relation {
    pub lt: Vec<Vec<bool>>,
}

impl Relation {
    pub fn len(&self) -> usize {
        self.lt.len()
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.lt[a][b] || self.lt[b][a]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|&(a, b)| self.lt[a][b]).collect()
    }
}

/// Random DAG over `n` elements (edges point from lower to higher index in a
/// shuffled labelling), closed transitively with Floyd–Warshall.
pub fn random_order(rng: &mut SplitMix64, n: usize) -> Relation {
    let mut label: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut label);
    let density = rng.between(0, 100) as u64;
    let mut lt = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.below(100) < density as usize {
                lt[label[i]][label[j]] = true;
            }
        }
    }
    for m in 0..n {
        for a in 0..n {
            if lt[a][m] {
                let via = lt[m].clone();
                for (b, reach) in via.into_iter().enumerate() {
                    lt[a][b] |= reach;
                }
            }
        }
    }
    Relation { lt }
}

/// Largest antichain by enumerating every subset.
pub fn brute_width(r: &Relation) -> usize {
    let n = r.len();
    assert!(n <= 20, "brute force over {n} elements");
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let xs: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if xs.iter().enumerate().all(|(i, &a)| xs[i + 1..].iter().all(|&b| !r.comparable(a, b))) {
            best = size;
        }
    }
    best
}

/// Per-process kbo-delivery sequences of the correct processes.
pub fn correct_sequences(trace: &Trace) -> Vec<Vec<MessageId>> {
    let faulty = trace.faulty();
    trace
        .deliveries()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !faulty.iter().any(|p| p.index() == *i))
        .map(|(_, s)| s)
        .collect()
}

/// Agreed order over the messages delivered by every sequence: `a < b` iff
/// every sequence delivers `a` first.
pub fn agreed_order(seqs: &[Vec<MessageId>]) -> (Vec<MessageId>, Relation) {
    let pos: Vec<BTreeMap<MessageId, usize>> =
        seqs.iter().map(|s| s.iter().enumerate().map(|(i, m)| (*m, i)).collect()).collect();
    let common: Vec<MessageId> = match pos.first() {
        None => Vec::new(),
        Some(first) => first.keys().copied().filter(|m| pos.iter().all(|p| p.contains_key(m))).collect(),
    };
    let lt = common
        .iter()
        .map(|a| common.iter().map(|b| a != b && pos.iter().all(|p| p[a] < p[b])).collect())
        .collect();
    (common, Relation { lt })
}

/// An antichain of exactly `size` elements, searched over all `size`-subsets.
pub fn antichain_of_size(r: &Relation, size: usize) -> Option<Vec<usize>> {
    fn go(r: &Relation, size: usize, from: usize, acc: &mut Vec<usize>) -> bool {
        if acc.len() == size {
            return true;
        }
        for x in from..r.len() {
            if acc.iter().all(|&a| !r.comparable(a, x)) {
                acc.push(x);
                if go(r, size, x + 1, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = Vec::new();
    go(r, size, 0, &mut acc).then_some(acc)
}

/// Distinct decided values per k-SA instance, from `decide` events.
pub fn decided_per_instance(trace: &Trace) -> BTreeMap<u64, BTreeSet<String>> {
    let mut out: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    for e in &trace.events {
        if let kbo_core::trace::EventKind::Decide { instance, value } = &e.kind {
            out.entry(*instance).or_default().insert(value.to_string());
        }
    }
    out
}
