//! Greedy base collections maintained under ground-set updates.
//!
//! Level `i` is a [`MinBaseState`] whose weights are the loads each element
//! picks up in levels `0..i`. An update at level `i` moves at most a couple
//! of elements in or out of that level's base, which shifts their weight in
//! every later level; those shifts are replayed as weight changes before the
//! structural update reaches the next level.
//!
//! Levels can lag behind: only the first [`GreedyCollection::synced`] levels
//! follow updates eagerly. A lagging level remembers its old contents, and
//! [`GreedyCollection::sync_next_level`] brings it up to date.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::matroid::{DynamicMatroid, ElementDescriptor, ElementId, MatroidError, RankOracle};
use crate::min_base::{Base, CompositeWeight, MinBaseError, MinBaseState, SwapReport};
use crate::value::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollectionError {
    #[error("element {0} is already in the collection")]
    Duplicate(ElementId),
    #[error("element {0} is not in the collection")]
    Unknown(ElementId),
    #[error("collection has no synchronized levels")]
    NoLevels,
    #[error("collection ground set is empty")]
    NoElements,
    #[error(transparent)]
    MinBase(#[from] MinBaseError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
}

/// A ground-set update as it appears in a trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Update {
    Insert(ElementId, ElementDescriptor),
    Delete(ElementId),
}

impl Update {
    pub fn id(&self) -> ElementId {
        match self {
            Update::Insert(e, _) | Update::Delete(e) => *e,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self, Update::Insert(..))
    }
}

/// Net change of one level's base during a single update.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelChange {
    pub added: Vec<ElementId>,
    pub removed: Vec<ElementId>,
}

impl LevelChange {
    /// Swaps ignoring the updated element itself.
    pub fn swaps_besides(&self, e: ElementId) -> usize {
        let a = self.added.iter().filter(|&&x| x != e).count();
        let r = self.removed.iter().filter(|&&x| x != e).count();
        a.max(r)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecourseReport {
    /// One entry per synchronized level.
    pub levels: Vec<LevelChange>,
    /// Calls into a level's min-base structure (weight changes plus the
    /// structural update itself).
    pub min_base_updates: usize,
    pub queries: u64,
}

impl RecourseReport {
    pub fn recourse_bound(k: usize) -> usize {
        k * k + k
    }
}

#[derive(Clone, Debug, Default)]
pub struct GreedyCollection {
    levels: Vec<MinBaseState>,
    synced: usize,
    members: BTreeSet<ElementId>,
    loads: HashMap<ElementId, u64>,
    by_load: BTreeSet<(u64, ElementId)>,
}

impl GreedyCollection {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `k` synchronized levels over `members`, built level by level.
    pub fn new<O: RankOracle>(
        oracle: &O,
        members: impl IntoIterator<Item = ElementId>,
        k: usize,
    ) -> Result<Self, CollectionError> {
        let mut c = Self::empty();
        for e in members {
            c.add_member(e)?;
        }
        for _ in 0..k {
            c.sync_next_level(oracle)?;
        }
        Ok(c)
    }

    pub fn synced(&self) -> usize {
        self.synced
    }

    /// Levels ever built, synchronized or not.
    pub fn allocated(&self) -> usize {
        self.levels.len()
    }

    pub fn members(&self) -> &BTreeSet<ElementId> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, e: ElementId) -> bool {
        self.members.contains(&e)
    }

    pub fn level(&self, i: usize) -> Option<&MinBaseState> {
        self.levels.get(i)
    }

    /// Bases of the synchronized levels.
    pub fn bases(&self) -> Vec<Base> {
        self.levels[..self.synced]
            .iter()
            .map(MinBaseState::current_base)
            .collect()
    }

    /// `L(e)`: number of synchronized bases containing `e`.
    pub fn load(&self, e: ElementId) -> Option<u64> {
        self.loads.get(&e).copied()
    }

    pub fn loads(&self) -> BTreeMap<ElementId, u64> {
        self.loads.iter().map(|(&e, &l)| (e, l)).collect()
    }

    pub fn total_load(&self) -> u64 {
        self.loads.values().sum()
    }

    pub fn max_load(&self) -> Option<(u64, ElementId)> {
        self.by_load.last().copied()
    }

    pub fn min_load(&self) -> Option<(u64, ElementId)> {
        self.by_load.first().copied()
    }

    pub fn relative_load(&self, e: ElementId) -> Result<Rational, CollectionError> {
        let l = self.load(e).ok_or(CollectionError::Unknown(e))?;
        self.relative(l)
    }

    pub fn max_relative_load(&self) -> Result<Rational, CollectionError> {
        let (l, _) = self.max_load().ok_or(CollectionError::NoElements)?;
        self.relative(l)
    }

    pub fn min_relative_load(&self) -> Result<Rational, CollectionError> {
        let (l, _) = self.min_load().ok_or(CollectionError::NoElements)?;
        self.relative(l)
    }

    fn relative(&self, l: u64) -> Result<Rational, CollectionError> {
        if self.synced == 0 {
            return Err(CollectionError::NoLevels);
        }
        Ok(Rational::new(l as i64, self.synced as i64))
    }

    fn add_member(&mut self, e: ElementId) -> Result<(), CollectionError> {
        if !self.members.insert(e) {
            return Err(CollectionError::Duplicate(e));
        }
        self.loads.insert(e, 0);
        self.by_load.insert((0, e));
        Ok(())
    }

    fn remove_member(&mut self, e: ElementId) -> Result<(), CollectionError> {
        if !self.members.remove(&e) {
            return Err(CollectionError::Unknown(e));
        }
        let l = self.loads.remove(&e).expect("member has a load");
        self.by_load.remove(&(l, e));
        Ok(())
    }

    fn shift_load(&mut self, e: ElementId, d: i64) {
        if d == 0 {
            return;
        }
        let l = self.loads.get_mut(&e).expect("shifted element is a member");
        self.by_load.remove(&(*l, e));
        *l = (*l as i64 + d) as u64;
        self.by_load.insert((*l, e));
    }

    /// Applies `update` to both the matroid and the collection, in the order
    /// each side needs.
    pub fn apply_update(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<RecourseReport, CollectionError> {
        match update {
            Update::Insert(e, desc) => {
                m.insert_element(*e, desc.clone())?;
                self.insert(m, *e)
            }
            Update::Delete(e) => {
                let report = self.delete(m, *e)?;
                m.delete_element(*e)?;
                Ok(report)
            }
        }
    }

    /// Adds `e` to the ground set and to every synchronized level.
    pub fn insert<O: RankOracle>(
        &mut self,
        oracle: &O,
        e: ElementId,
    ) -> Result<RecourseReport, CollectionError> {
        self.add_member(e)?;
        self.propagate(oracle, e, true)
    }

    /// Removes `e`; the oracle must still know `e`, since weight changes at
    /// a level run before `e` leaves it.
    pub fn delete<O: RankOracle>(
        &mut self,
        oracle: &O,
        e: ElementId,
    ) -> Result<RecourseReport, CollectionError> {
        if !self.members.contains(&e) {
            return Err(CollectionError::Unknown(e));
        }
        let report = self.propagate(oracle, e, false)?;
        self.remove_member(e)?;
        Ok(report)
    }

    fn propagate<O: RankOracle>(
        &mut self,
        oracle: &O,
        e: ElementId,
        inserting: bool,
    ) -> Result<RecourseReport, CollectionError> {
        let mut report = RecourseReport::default();
        // Net membership change of each element over the levels done so far,
        // which is also the change of its weight at the current level.
        let mut delta: BTreeMap<ElementId, i64> = BTreeMap::new();
        for i in 0..self.synced {
            let level = &mut self.levels[i];
            let mut here: BTreeMap<ElementId, i64> = BTreeMap::new();
            let note = |s: SwapReport, here: &mut BTreeMap<ElementId, i64>| {
                if let Some(a) = s.added {
                    *here.entry(a).or_default() += 1;
                }
                if let Some(r) = s.removed {
                    *here.entry(r).or_default() -= 1;
                }
            };
            for (&x, &d) in &delta {
                if d == 0 || x == e {
                    continue;
                }
                let w = level.weight(x).expect("level tracks every member");
                let s = level.change_weight(oracle, x, (w.load as i64 + d) as u64)?;
                report.queries += level.queries_last_update();
                report.min_base_updates += 1;
                note(s, &mut here);
            }
            let s = if inserting {
                let load = delta.get(&e).copied().unwrap_or(0) as u64;
                level.insert(oracle, e, load)?
            } else {
                level.delete(oracle, e)?
            };
            report.queries += level.queries_last_update();
            report.min_base_updates += 1;
            note(s, &mut here);

            let mut change = LevelChange::default();
            for (&x, &d) in &here {
                match d {
                    1 => change.added.push(x),
                    -1 => change.removed.push(x),
                    0 => {}
                    _ => unreachable!("membership moves by at most one per level"),
                }
                *delta.entry(x).or_default() += d;
            }
            report.levels.push(change);
        }
        for (x, d) in delta {
            if x != e || inserting {
                self.shift_load(x, d);
            }
        }
        Ok(report)
    }

    /// Inserts an element known to raise the rank of the ground set. It
    /// enters every synchronized base and nothing else moves.
    pub fn insert_coloop(&mut self, e: ElementId) -> Result<RecourseReport, CollectionError> {
        self.add_member(e)?;
        let mut report = RecourseReport::default();
        for (i, level) in self.levels[..self.synced].iter_mut().enumerate() {
            level.insert_coloop(e, i as u64)?;
            report.min_base_updates += 1;
            report.levels.push(LevelChange {
                added: vec![e],
                removed: vec![],
            });
        }
        let k = self.synced as i64;
        self.shift_load(e, k);
        Ok(report)
    }

    /// Deletes an element known to be a coloop of the ground set.
    pub fn delete_coloop(&mut self, e: ElementId) -> Result<RecourseReport, CollectionError> {
        if !self.members.contains(&e) {
            return Err(CollectionError::Unknown(e));
        }
        let mut report = RecourseReport::default();
        for level in &mut self.levels[..self.synced] {
            level.delete_coloop(e)?;
            report.min_base_updates += 1;
            report.levels.push(LevelChange {
                added: vec![],
                removed: vec![e],
            });
        }
        self.remove_member(e)?;
        Ok(report)
    }

    /// Brings level `synced` up to date and counts its base in the loads.
    ///
    /// A fresh level is built greedily. A lagging level first drops elements
    /// that left the ground set (the oracle no longer knows them), then
    /// corrects weights, then receives the missing insertions cheapest first.
    /// Returns the number of rank queries spent.
    pub fn sync_next_level<O: RankOracle>(&mut self, oracle: &O) -> Result<u64, CollectionError> {
        let j = self.synced;
        let target = |e: ElementId| CompositeWeight::new(self.loads[&e], e);
        let mut queries = 0;
        if j == self.levels.len() {
            let level = MinBaseState::build(oracle, self.members.iter().map(|&e| target(e)))?;
            queries += level.queries_last_update();
            self.levels.push(level);
        } else {
            let level = &self.levels[j];
            let mut inserts: Vec<CompositeWeight> = self
                .members
                .iter()
                .filter(|&&e| !level.contains(e))
                .map(|&e| target(e))
                .collect();
            inserts.sort_unstable();
            let reweights: Vec<CompositeWeight> = level
                .elements()
                .filter(|w| self.members.contains(&w.id) && *w != target(w.id))
                .map(|w| target(w.id))
                .collect();
            let deletes: Vec<ElementId> = level
                .elements()
                .filter(|w| !self.members.contains(&w.id))
                .map(|w| w.id)
                .collect();
            let level = &mut self.levels[j];
            for e in deletes {
                level.delete(oracle, e)?;
                queries += level.queries_last_update();
            }
            for w in reweights {
                level.change_weight(oracle, w.id, w.load)?;
                queries += level.queries_last_update();
            }
            for w in inserts {
                level.insert(oracle, w.id, w.load)?;
                queries += level.queries_last_update();
            }
        }
        let base = self.levels[j].current_base();
        for e in base {
            self.shift_load(e, 1);
        }
        self.synced += 1;
        Ok(queries)
    }

    /// Stops following updates in the top `n` synchronized levels. Their
    /// contents stay behind for a later [`Self::sync_next_level`].
    pub fn unsync_tail(&mut self, n: usize) {
        for _ in 0..n.min(self.synced) {
            self.synced -= 1;
            let base = self.levels[self.synced].current_base();
            for e in base {
                self.shift_load(e, -1);
            }
        }
    }
}
