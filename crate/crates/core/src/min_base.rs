//! Dynamic minimum-weight base with logarithmically many rank queries per
//! update.
//!
//! Weights are made unique by pairing them with the element id
//! ([`CompositeWeight`]), so the minimum base is unique. Insertion finds the
//! heaviest element on the circuit closed by the new element; deletion finds
//! the cheapest element not spanned by the rest of the base. Both searches
//! are binary searches over prefixes of a sorted sequence, and every probe
//! is one rank query.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::matroid::{ElementId, MatroidError, RankOracle};

/// `(load, id)` in lexicographic order. Distinct elements never tie.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeWeight {
    pub load: u64,
    pub id: ElementId,
}

impl CompositeWeight {
    pub fn new(load: u64, id: ElementId) -> Self {
        CompositeWeight { load, id }
    }
}

pub type Base = BTreeSet<ElementId>;

/// Symmetric difference between the bases before and after one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SwapReport {
    pub added: Option<ElementId>,
    pub removed: Option<ElementId>,
}

impl SwapReport {
    pub fn is_empty(&self) -> bool {
        self.added.is_none() && self.removed.is_none()
    }

    /// Composition of two consecutive reports, with cancellation.
    fn then(self, next: SwapReport) -> SwapReport {
        let mut added: Vec<ElementId> = self.added.into_iter().collect();
        let mut removed: Vec<ElementId> = self.removed.into_iter().collect();
        if let Some(a) = next.added {
            if let Some(p) = removed.iter().position(|r| *r == a) {
                removed.remove(p);
            } else {
                added.push(a);
            }
        }
        if let Some(r) = next.removed {
            if let Some(p) = added.iter().position(|a| *a == r) {
                added.remove(p);
            } else {
                removed.push(r);
            }
        }
        debug_assert!(
            added.len() <= 1 && removed.len() <= 1,
            "weight change moved more than one swap"
        );
        SwapReport {
            added: added.first().copied(),
            removed: removed.first().copied(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinBaseError {
    #[error("element {0} is already tracked")]
    Duplicate(ElementId),
    #[error("element {0} is not tracked")]
    Unknown(ElementId),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
}

/// The unique minimum base of the tracked elements under their composite
/// weights.
///
/// Tracks its own element set, which may be a subset of the oracle's ground
/// set (a restriction); all queries only touch tracked elements.
#[derive(Clone, Debug, Default)]
pub struct MinBaseState {
    order: Vec<CompositeWeight>,
    base: Vec<CompositeWeight>,
    weights: HashMap<ElementId, u64>,
    in_base: HashSet<ElementId>,
    base_weight: u64,
    max_load: u64,
    last_queries: u64,
}

impl MinBaseState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Greedy construction: one rank query per element.
    pub fn build<O: RankOracle>(
        oracle: &O,
        items: impl IntoIterator<Item = CompositeWeight>,
    ) -> Result<Self, MinBaseError> {
        let mut order: Vec<CompositeWeight> = items.into_iter().collect();
        order.sort_unstable();
        let mut state = MinBaseState::new();
        for w in &order {
            if state.weights.insert(w.id, w.load).is_some() {
                return Err(MinBaseError::Duplicate(w.id));
            }
        }
        for w in &order {
            let r = oracle.rank(state.base.iter().map(|b| b.id).chain(std::iter::once(w.id)))?;
            state.last_queries += 1;
            if r > state.base.len() {
                state.base.push(*w);
                state.in_base.insert(w.id);
                state.base_weight += w.load;
            }
        }
        state.max_load = order.iter().map(|w| w.load).max().unwrap_or(0);
        state.order = order;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.weights.contains_key(&id)
    }

    pub fn in_base(&self, id: ElementId) -> bool {
        self.in_base.contains(&id)
    }

    pub fn weight(&self, id: ElementId) -> Option<CompositeWeight> {
        self.weights
            .get(&id)
            .map(|&load| CompositeWeight::new(load, id))
    }

    pub fn current_base(&self) -> Base {
        self.in_base.iter().copied().collect()
    }

    /// Base elements in increasing composite weight.
    pub fn base_in_order(&self) -> impl Iterator<Item = CompositeWeight> + '_ {
        self.base.iter().copied()
    }

    /// All tracked elements in increasing composite weight.
    pub fn elements(&self) -> impl Iterator<Item = CompositeWeight> + '_ {
        self.order.iter().copied()
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    pub fn base_weight(&self) -> u64 {
        self.base_weight
    }

    /// Largest load ever seen by this state (the `W` of the query bound).
    pub fn max_load(&self) -> u64 {
        self.max_load
    }

    pub fn queries_last_update(&self) -> u64 {
        self.last_queries
    }

    pub fn insert<O: RankOracle>(
        &mut self,
        oracle: &O,
        id: ElementId,
        load: u64,
    ) -> Result<SwapReport, MinBaseError> {
        self.last_queries = 0;
        self.insert_inner(oracle, id, load)
    }

    fn insert_inner<O: RankOracle>(
        &mut self,
        oracle: &O,
        id: ElementId,
        load: u64,
    ) -> Result<SwapReport, MinBaseError> {
        if self.weights.contains_key(&id) {
            return Err(MinBaseError::Duplicate(id));
        }
        let e = CompositeWeight::new(load, id);
        let b = self.base.len();

        // Does the whole base span e? If not, e is independent of B.
        let full = self.prefix_rank_with(oracle, b, id)?;
        self.track(e);
        if full > b {
            self.add_to_base(e);
            return Ok(SwapReport {
                added: Some(id),
                removed: None,
            });
        }
        // e closes a circuit whose heaviest element is at most max(B).
        if self.base.last().is_some_and(|last| *last < e) {
            return Ok(SwapReport::default());
        }
        // Smallest prefix B[..t] spanning e; t == 0 means e is a loop.
        let (mut lo, mut hi) = (0usize, b);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.prefix_rank_with(oracle, mid, id)? == mid {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == 0 {
            return Ok(SwapReport::default());
        }
        let f = self.base[lo - 1];
        if f > e {
            self.remove_from_base(f);
            self.add_to_base(e);
            Ok(SwapReport {
                added: Some(id),
                removed: Some(f.id),
            })
        } else {
            Ok(SwapReport::default())
        }
    }

    pub fn delete<O: RankOracle>(
        &mut self,
        oracle: &O,
        id: ElementId,
    ) -> Result<SwapReport, MinBaseError> {
        self.last_queries = 0;
        self.delete_inner(oracle, id)
    }

    fn delete_inner<O: RankOracle>(
        &mut self,
        oracle: &O,
        id: ElementId,
    ) -> Result<SwapReport, MinBaseError> {
        let e = self.weight(id).ok_or(MinBaseError::Unknown(id))?;
        let pos = self
            .order
            .binary_search(&e)
            .expect("tracked element is ordered");
        if !self.in_base.contains(&id) {
            self.untrack(e);
            return Ok(SwapReport::default());
        }
        self.remove_from_base(e);
        self.order.remove(pos);
        self.weights.remove(&id);
        // Non-base elements lighter than e are spanned by B - e, so the
        // candidates are the elements after e's old position.
        let candidates = pos..self.order.len();
        let r = self.base.len();
        if candidates.is_empty() || self.candidates_rank_from(oracle, pos, candidates.end)? == r {
            return Ok(SwapReport {
                added: None,
                removed: Some(id),
            });
        }
        let (mut lo, mut hi) = (candidates.start, candidates.end);
        // Smallest end t with rk(B - e + order[pos..t]) = |B - e| + 1.
        while lo + 1 < hi {
            let mid = lo + (hi - lo) / 2;
            if self.candidates_rank_from(oracle, pos, mid)? > r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let f = self.order[hi - 1];
        debug_assert!(!self.in_base.contains(&f.id));
        self.add_to_base(f);
        Ok(SwapReport {
            added: Some(f.id),
            removed: Some(id),
        })
    }

    /// Moves `id` to a new load; equivalent to delete followed by insert,
    /// reported as the net change.
    pub fn change_weight<O: RankOracle>(
        &mut self,
        oracle: &O,
        id: ElementId,
        load: u64,
    ) -> Result<SwapReport, MinBaseError> {
        self.last_queries = 0;
        if !self.weights.contains_key(&id) {
            return Err(MinBaseError::Unknown(id));
        }
        let first = self.delete_inner(oracle, id)?;
        let second = self.insert_inner(oracle, id, load)?;
        Ok(first.then(second))
    }

    /// Inserts an element the caller knows to be a coloop of the tracked set
    /// plus itself. No rank queries.
    pub fn insert_coloop(&mut self, id: ElementId, load: u64) -> Result<SwapReport, MinBaseError> {
        self.last_queries = 0;
        if self.weights.contains_key(&id) {
            return Err(MinBaseError::Duplicate(id));
        }
        let e = CompositeWeight::new(load, id);
        self.track(e);
        self.add_to_base(e);
        Ok(SwapReport {
            added: Some(id),
            removed: None,
        })
    }

    /// Deletes an element the caller knows to be a coloop. No rank queries.
    pub fn delete_coloop(&mut self, id: ElementId) -> Result<SwapReport, MinBaseError> {
        self.last_queries = 0;
        let e = self.weight(id).ok_or(MinBaseError::Unknown(id))?;
        debug_assert!(self.in_base.contains(&id), "coloop must be in the base");
        let was_in = self.in_base.contains(&id);
        if was_in {
            self.remove_from_base(e);
        }
        self.untrack(e);
        Ok(SwapReport {
            added: None,
            removed: was_in.then_some(id),
        })
    }

    fn track(&mut self, e: CompositeWeight) {
        let pos = self.order.binary_search(&e).unwrap_err();
        self.order.insert(pos, e);
        self.weights.insert(e.id, e.load);
        self.max_load = self.max_load.max(e.load);
    }

    fn untrack(&mut self, e: CompositeWeight) {
        let pos = self
            .order
            .binary_search(&e)
            .expect("tracked element is ordered");
        self.order.remove(pos);
        self.weights.remove(&e.id);
    }

    fn add_to_base(&mut self, e: CompositeWeight) {
        let pos = self.base.binary_search(&e).unwrap_err();
        self.base.insert(pos, e);
        self.in_base.insert(e.id);
        self.base_weight += e.load;
    }

    fn remove_from_base(&mut self, e: CompositeWeight) {
        let pos = self
            .base
            .binary_search(&e)
            .expect("base element is ordered");
        self.base.remove(pos);
        self.in_base.remove(&e.id);
        self.base_weight -= e.load;
    }

    /// `rk(B[..t] + e)`.
    fn prefix_rank_with<O: RankOracle>(
        &mut self,
        oracle: &O,
        t: usize,
        e: ElementId,
    ) -> Result<usize, MatroidError> {
        self.last_queries += 1;
        oracle.rank(
            self.base[..t]
                .iter()
                .map(|w| w.id)
                .chain(std::iter::once(e)),
        )
    }

    /// `rk(B + non-base elements of order[start..end])`.
    fn candidates_rank_from<O: RankOracle>(
        &mut self,
        oracle: &O,
        start: usize,
        end: usize,
    ) -> Result<usize, MatroidError> {
        self.last_queries += 1;
        let in_base = &self.in_base;
        let extra = self.order[start..end]
            .iter()
            .filter(|w| !in_base.contains(&w.id))
            .map(|w| w.id);
        oracle.rank(self.base.iter().map(|w| w.id).chain(extra))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matroid::{DynamicMatroid, ElementDescriptor, MatroidFamily};

    fn id(i: u64) -> ElementId {
        ElementId(i)
    }

    fn graphic(edges: &[(u64, u32, u32)]) -> DynamicMatroid {
        let mut m = DynamicMatroid::new(MatroidFamily::Graphic, 64);
        for &(i, u, v) in edges {
            m.insert_element(id(i), ElementDescriptor::Edge { u, v })
                .unwrap();
        }
        m
    }

    fn uniform(rank: usize, n: u64) -> DynamicMatroid {
        let mut m = DynamicMatroid::new(MatroidFamily::Uniform { rank }, 64);
        for i in 0..n {
            m.insert_element(id(i), ElementDescriptor::Plain).unwrap();
        }
        m
    }

    #[test]
    fn insert_swaps_out_heavier_circuit_element() {
        // Uniform(2): a=0 (weight 2), c=2 (weight 6); e=4 with weight 3.
        let m = uniform(2, 5);
        let mut s = MinBaseState::new();
        s.insert(&m, id(0), 2).unwrap();
        s.insert(&m, id(2), 6).unwrap();
        let rep = s.insert(&m, id(4), 3).unwrap();
        assert_eq!(
            rep,
            SwapReport {
                added: Some(id(4)),
                removed: Some(id(2))
            }
        );
        assert_eq!(s.current_base(), [id(0), id(4)].into());
    }

    #[test]
    fn insert_heaviest_on_circuit_is_noop() {
        let m = graphic(&[(12, 1, 2), (13, 1, 3), (23, 2, 3)]);
        let mut s = MinBaseState::new();
        s.insert(&m, id(12), 1).unwrap();
        s.insert(&m, id(13), 2).unwrap();
        assert!(s.insert(&m, id(23), 5).unwrap().is_empty());
        assert_eq!(s.current_base(), [id(12), id(13)].into());
    }

    #[test]
    fn insert_coloop_grows_base() {
        let m = graphic(&[(12, 1, 2), (23, 2, 3)]);
        let mut s = MinBaseState::new();
        s.insert(&m, id(12), 1).unwrap();
        let rep = s.insert(&m, id(23), 7).unwrap();
        assert_eq!(
            rep,
            SwapReport {
                added: Some(id(23)),
                removed: None
            }
        );
    }

    #[test]
    fn delete_replaces_with_cheapest_unspanned() {
        let m = uniform(2, 4);
        let mut s =
            MinBaseState::build(&m, (0..4).map(|i| CompositeWeight::new(i + 1, id(i)))).unwrap();
        assert_eq!(s.current_base(), [id(0), id(1)].into());
        let rep = s.delete(&m, id(1)).unwrap();
        assert_eq!(
            rep,
            SwapReport {
                added: Some(id(2)),
                removed: Some(id(1))
            }
        );
    }

    #[test]
    fn delete_coloop_shrinks_base() {
        let m = graphic(&[(12, 1, 2), (23, 2, 3)]);
        let mut s = MinBaseState::build(
            &m,
            [
                CompositeWeight::new(0, id(12)),
                CompositeWeight::new(0, id(23)),
            ],
        )
        .unwrap();
        let rep = s.delete(&m, id(23)).unwrap();
        assert_eq!(
            rep,
            SwapReport {
                added: None,
                removed: Some(id(23))
            }
        );
        assert_eq!(s.current_base(), [id(12)].into());
    }

    #[test]
    fn delete_non_base_costs_nothing() {
        let m = uniform(1, 3);
        let mut s =
            MinBaseState::build(&m, (0..3).map(|i| CompositeWeight::new(0, id(i)))).unwrap();
        let before = m.counter().total();
        assert!(s.delete(&m, id(2)).unwrap().is_empty());
        assert_eq!(s.queries_last_update(), 0);
        assert_eq!(m.counter().total(), before);
    }

    #[test]
    fn k4_weight_raise_swaps_in_cheapest_completer() {
        // K4 edges 12<13<14<23<24<34 by id, all loads 0.
        let edges = [
            (12, 1, 2),
            (13, 1, 3),
            (14, 1, 4),
            (23, 2, 3),
            (24, 2, 4),
            (34, 3, 4),
        ];
        let m = graphic(&edges);
        let mut s = MinBaseState::build(&m, edges.iter().map(|e| CompositeWeight::new(0, id(e.0))))
            .unwrap();
        assert_eq!(s.current_base(), [id(12), id(13), id(14)].into());
        let rep = s.change_weight(&m, id(12), 1).unwrap();
        assert_eq!(
            rep,
            SwapReport {
                added: Some(id(23)),
                removed: Some(id(12))
            }
        );
        assert_eq!(s.current_base(), [id(13), id(14), id(23)].into());
    }

    #[test]
    fn weight_changes_that_cannot_move_the_base() {
        let m = uniform(2, 4);
        let mut s =
            MinBaseState::build(&m, (0..4).map(|i| CompositeWeight::new(i + 1, id(i)))).unwrap();
        assert!(s.change_weight(&m, id(3), 9).unwrap().is_empty());
        assert!(s.change_weight(&m, id(1), 0).unwrap().is_empty());
        assert_eq!(s.current_base(), [id(0), id(1)].into());
        assert_eq!(s.base_weight(), 1);
    }

    #[test]
    fn loops_never_enter() {
        let m = graphic(&[(0, 5, 5), (1, 1, 2)]);
        let mut s = MinBaseState::new();
        assert!(s.insert(&m, id(0), 0).unwrap().is_empty());
        assert_eq!(s.insert(&m, id(1), 3).unwrap().added, Some(id(1)));
        assert_eq!(s.current_base(), [id(1)].into());
    }

    #[test]
    fn errors_and_empty_state() {
        let m = uniform(1, 2);
        let mut s = MinBaseState::new();
        assert!(s.current_base().is_empty());
        s.insert(&m, id(0), 0).unwrap();
        assert_eq!(s.insert(&m, id(0), 1), Err(MinBaseError::Duplicate(id(0))));
        assert_eq!(s.delete(&m, id(7)), Err(MinBaseError::Unknown(id(7))));
        assert_eq!(
            s.change_weight(&m, id(7), 1),
            Err(MinBaseError::Unknown(id(7)))
        );
    }
}
