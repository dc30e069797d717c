//! Finite posets with an explicit strict-order matrix, their width, a
//! maximum antichain and a minimum chain cover.
//!
//! Width is computed through Dilworth's theorem: for the bipartite graph with
//! an edge `x_L → y_R` whenever `x < y`, a maximum matching `M` gives a
//! minimum chain cover of `|V| - |M|` chains (follow matched edges). König's
//! theorem turns the same matching into a minimum vertex cover `C`, and the
//! elements with neither copy in `C` form an antichain of size `|V| - |M|`.

use std::collections::BTreeMap;
use std::fmt::{Debug, Display};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PosetError<T: Display + Debug> {
    #[error("{0} precedes itself")]
    Reflexive(T),
    #[error("{0} and {1} precede each other")]
    Cycle(T, T),
    #[error("{0} < {1} and {1} < {2} but not {0} < {2}")]
    Intransitive(T, T, T),
    #[error("{0} occurs twice")]
    DuplicateElement(T),
    #[error("{0} is not an element")]
    UnknownElement(T),
}

/// A strict partial order `<` on a finite set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poset<T> {
    elements: Vec<T>,
    index: BTreeMap<T, usize>,
    less: Vec<Vec<bool>>,
}

impl<T: Ord + Clone + Display + Debug> Poset<T> {
    /// Build from a strict order given as a predicate, checking that it is
    /// irreflexive, antisymmetric and transitive.
    pub fn from_fn(elements: Vec<T>, less: impl Fn(&T, &T) -> bool) -> Result<Self, PosetError<T>> {
        let index = index_of(&elements)?;
        let n = elements.len();
        let mut m = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = less(&elements[i], &elements[j]);
            }
        }
        let p = Poset { elements, index, less: m };
        p.validate()?;
        Ok(p)
    }

    /// Build the transitive closure of `edges`. Fails on a cycle.
    #[allow(clippy::needless_range_loop)]
    pub fn from_edges(elements: Vec<T>, edges: &[(T, T)]) -> Result<Self, PosetError<T>> {
        let index = index_of(&elements)?;
        let n = elements.len();
        let mut m = vec![vec![false; n]; n];
        for (a, b) in edges {
            let i = *index.get(a).ok_or_else(|| PosetError::UnknownElement(a.clone()))?;
            let j = *index.get(b).ok_or_else(|| PosetError::UnknownElement(b.clone()))?;
            m[i][j] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if m[i][k] {
                    for j in 0..n {
                        if m[k][j] {
                            m[i][j] = true;
                        }
                    }
                }
            }
        }
        let p = Poset { elements, index, less: m };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), PosetError<T>> {
        let n = self.len();
        let e = |i: usize| self.elements[i].clone();
        for i in 0..n {
            if self.less[i][i] {
                return Err(PosetError::Reflexive(e(i)));
            }
            for j in 0..n {
                if self.less[i][j] && self.less[j][i] {
                    return Err(PosetError::Cycle(e(i), e(j)));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if !self.less[i][j] {
                    continue;
                }
                for k in 0..n {
                    if self.less[j][k] && !self.less[i][k] {
                        return Err(PosetError::Intransitive(e(i), e(j), e(k)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[T] {
        &self.elements
    }

    pub fn contains(&self, x: &T) -> bool {
        self.index.contains_key(x)
    }

    /// `a < b`. False for non-elements.
    pub fn less(&self, a: &T, b: &T) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.less[i][j],
            _ => false,
        }
    }

    pub fn comparable(&self, a: &T, b: &T) -> bool {
        a == b || self.less(a, b) || self.less(b, a)
    }

    pub fn is_antichain(&self, xs: &[T]) -> bool {
        xs.iter().enumerate().all(|(i, a)| xs[i + 1..].iter().all(|b| !self.comparable(a, b)))
    }

    pub fn is_chain(&self, xs: &[T]) -> bool {
        xs.windows(2).all(|w| self.less(&w[0], &w[1]))
    }

    fn matching(&self) -> Matching {
        let all: Vec<usize> = (0..self.len()).collect();
        self.matching_on(&all)
    }

    /// Maximum matching of the comparability graph induced by `subset`.
    fn matching_on(&self, subset: &[usize]) -> Matching {
        let n = self.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &i in subset {
            adj[i] = subset.iter().copied().filter(|&j| self.less[i][j]).collect();
        }
        let mut m = Matching { left: vec![None; n], right: vec![None; n] };
        for &u in subset {
            let mut seen = vec![false; n];
            augment(u, &adj, &mut seen, &mut m);
        }
        m
    }

    fn width_on(&self, subset: &[usize]) -> usize {
        subset.len() - self.matching_on(subset).left.iter().flatten().count()
    }

    pub fn width(&self) -> usize {
        let m = self.matching();
        self.len() - m.left.iter().flatten().count()
    }

    /// A minimum chain cover; each chain is listed in increasing order.
    pub fn chain_cover(&self) -> Vec<Vec<T>> {
        let m = self.matching();
        (0..self.len())
            .filter(|&j| m.right[j].is_none())
            .map(|start| {
                let mut chain = vec![self.elements[start].clone()];
                let mut at = start;
                while let Some(next) = m.left[at] {
                    chain.push(self.elements[next].clone());
                    at = next;
                }
                chain
            })
            .collect()
    }

    /// The maximum antichain that comes first in element order: each element
    /// is kept if some maximum antichain still extends the ones kept so far.
    /// Costs one matching per element, so it is meant for witnesses.
    pub fn first_maximum_antichain(&self) -> Vec<T> {
        let n = self.len();
        let w = self.width();
        let mut chosen = Vec::new();
        let mut alive = vec![true; n];
        for x in 0..n {
            if !alive[x] || chosen.len() == w {
                continue;
            }
            let rest: Vec<usize> = (0..n)
                .filter(|&y| alive[y] && y != x && !self.less[x][y] && !self.less[y][x])
                .collect();
            if chosen.len() + 1 + self.width_on(&rest) == w {
                chosen.push(x);
                alive = vec![false; n];
                for y in rest {
                    alive[y] = true;
                }
            } else {
                alive[x] = false;
            }
        }
        chosen.into_iter().map(|x| self.elements[x].clone()).collect()
    }

    /// A maximum antichain, in element order.
    #[allow(clippy::needless_range_loop)]
    pub fn maximum_antichain(&self) -> Vec<T> {
        let n = self.len();
        let m = self.matching();
        // Z: reached from free left vertices along edges L→R, and back R→L
        // along matched edges.
        let mut zl = vec![false; n];
        let mut zr = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| m.left[i].is_none()).collect();
        for &i in &stack {
            zl[i] = true;
        }
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if self.less[u][v] && !zr[v] {
                    zr[v] = true;
                    if let Some(w) = m.right[v] {
                        if !zl[w] {
                            zl[w] = true;
                            stack.push(w);
                        }
                    }
                }
            }
        }
        // cover = (L \ Z) ∪ (R ∩ Z); keep x with x_L, x_R both outside it
        (0..n).filter(|&x| zl[x] && !zr[x]).map(|x| self.elements[x].clone()).collect()
    }
}

struct Matching {
    left: Vec<Option<usize>>,
    right: Vec<Option<usize>>,
}

fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], m: &mut Matching) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if m.right[v].is_none_or(|w| augment(w, adj, seen, m)) {
            m.left[u] = Some(v);
            m.right[v] = Some(u);
            return true;
        }
    }
    false
}

fn index_of<T: Ord + Clone + Display + Debug>(elements: &[T]) -> Result<BTreeMap<T, usize>, PosetError<T>> {
    let mut index = BTreeMap::new();
    for (i, e) in elements.iter().enumerate() {
        if index.insert(e.clone(), i).is_some() {
            return Err(PosetError::DuplicateElement(e.clone()));
        }
    }
    Ok(index)
}

/// A partition of the poset into `k` or fewer chains, one per channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channels<T> {
    pub chains: Vec<Vec<T>>,
}

impl<T: Ord + Clone> Channels<T> {
    /// Channel of each element, numbered from 1.
    pub fn assignment(&self) -> BTreeMap<T, usize> {
        self.chains
            .iter()
            .enumerate()
            .flat_map(|(c, chain)| chain.iter().map(move |x| (x.clone(), c + 1)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("width {width} exceeds k = {k}")]
pub struct BoundViolation<T: Debug> {
    pub width: usize,
    pub k: usize,
    /// A maximum antichain, the certificate that no `k` chains suffice.
    pub antichain: Vec<T>,
}

/// Assign every element to one of at most `k` totally ordered channels.
pub fn decompose_channels<T: Ord + Clone + Display + Debug>(
    poset: &Poset<T>,
    k: usize,
) -> Result<Channels<T>, BoundViolation<T>> {
    let chains = poset.chain_cover();
    if chains.len() > k {
        return Err(BoundViolation { width: chains.len(), k, antichain: poset.first_maximum_antichain() });
    }
    Ok(Channels { chains })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(n: u32) -> Poset<u32> {
        Poset::from_fn((0..n).collect(), |a, b| a < b).unwrap()
    }

    #[test]
    fn empty_and_singleton() {
        assert_eq!(total(0).width(), 0);
        assert_eq!(total(1).width(), 1);
        assert!(total(0).maximum_antichain().is_empty());
    }

    #[test]
    fn total_order_is_one_chain() {
        let p = total(6);
        assert_eq!(p.width(), 1);
        let ch = decompose_channels(&p, 1).unwrap();
        assert_eq!(ch.chains, vec![(0..6).collect::<Vec<_>>()]);
    }

    #[test]
    fn discrete_order_is_all_antichain() {
        let p = Poset::from_fn((0..5u32).collect(), |_, _| false).unwrap();
        assert_eq!(p.width(), 5);
        assert_eq!(p.maximum_antichain(), vec![0, 1, 2, 3, 4]);
        let err = decompose_channels(&p, 3).unwrap_err();
        assert_eq!((err.width, err.antichain.len()), (5, 5));
    }

    #[test]
    fn closure_of_edges() {
        let p = Poset::from_edges(vec![1u32, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        assert!(p.less(&1, &3));
        assert_eq!(p.width(), 1);
    }

    #[test]
    fn malformed_relations_are_rejected() {
        assert_eq!(Poset::from_edges(vec![1u32, 2], &[(1, 2), (2, 1)]), Err(PosetError::Reflexive(1)));
        assert_eq!(
            Poset::from_fn(vec![1u32, 2, 3], |a, b| (*a, *b) == (1, 2) || (*a, *b) == (2, 3)),
            Err(PosetError::Intransitive(1, 2, 3))
        );
        assert!(matches!(Poset::from_fn(vec![1u32, 1], |_, _| false), Err(PosetError::DuplicateElement(1))));
        assert!(matches!(Poset::from_edges(vec![1u32], &[(1, 9)]), Err(PosetError::UnknownElement(9))));
    }

    /// Two chains a0<a1<a2 and b0<b1 with a0<b1: width 2.
    #[test]
    fn cover_and_antichain_certify_each_other() {
        let p = Poset::from_edges(
            vec![10u32, 11, 12, 20, 21],
            &[(10, 11), (11, 12), (20, 21), (10, 21)],
        )
        .unwrap();
        let cover = p.chain_cover();
        let anti = p.maximum_antichain();
        assert_eq!(cover.len(), 2);
        assert_eq!(anti.len(), 2);
        assert_eq!(p.first_maximum_antichain(), vec![10, 20]);
        assert!(p.is_antichain(&anti));
        assert!(cover.iter().all(|c| p.is_chain(c)));
        let assigned = Channels { chains: cover }.assignment();
        assert_eq!(assigned.len(), 5);
    }
}
