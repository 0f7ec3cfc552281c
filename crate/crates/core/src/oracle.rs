//! Brute-force ground truth for small matroids.
//!
//! Everything here enumerates subsets of the ground set and uses exact
//! rational arithmetic. A [`RankTable`] evaluates the rank of every subset
//! once (`2^n` queries) so that the packing number, covering number, ideal
//! relative loads and base enumerations can all be read off it.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::matroid::{ElementId, MatroidError, RankOracle};
use crate::min_base::{Base, CompositeWeight};
use crate::value::{Estimate, Rational};

/// Largest ground set the subset enumeration accepts.
pub const ORACLE_CAP: usize = 16;
/// Largest ground set accepted by the disjoint-base backtracking search.
pub const PACKING_SEARCH_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("ground set has {n} elements, above the exhaustive-search cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("covering number is undefined: the ground set is empty or contains a rank-0 element")]
    UndefinedCovering,
    #[error("element {0} is outside the chosen subset")]
    NotSubset(ElementId),
    #[error("supplied set is not a base of the complement restriction")]
    NotABase,
    #[error(transparent)]
    Matroid(#[from] MatroidError),
}

/// Greedy minimum-weight base: scan elements by increasing composite
/// weight and keep those that raise the rank. At most `|E|` queries.
pub fn static_min_weight_base<O: RankOracle>(
    oracle: &O,
    weights: &BTreeMap<ElementId, CompositeWeight>,
) -> Result<Base, OracleError> {
    let mut order: Vec<CompositeWeight> = oracle
        .ground_set()
        .into_iter()
        .map(|e| {
            weights
                .get(&e)
                .copied()
                .unwrap_or(CompositeWeight::new(0, e))
        })
        .collect();
    order.sort();
    let mut chosen: Vec<ElementId> = Vec::new();
    for w in order {
        let r = oracle.rank(chosen.iter().copied().chain(std::iter::once(w.id)))?;
        if r > chosen.len() {
            chosen.push(w.id);
        }
    }
    Ok(chosen.into_iter().collect())
}

/// Bases `B_1..B_k` built one after another, each the minimum base under
/// `(load among earlier bases, id)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticCollection {
    pub bases: Vec<Base>,
    pub loads: BTreeMap<ElementId, u64>,
}

pub fn greedy_collection_static<O: RankOracle>(
    oracle: &O,
    k: usize,
) -> Result<StaticCollection, OracleError> {
    let mut loads: BTreeMap<ElementId, u64> =
        oracle.ground_set().into_iter().map(|e| (e, 0)).collect();
    let mut bases = Vec::with_capacity(k);
    for _ in 0..k {
        let weights = loads
            .iter()
            .map(|(&e, &l)| (e, CompositeWeight::new(l, e)))
            .collect();
        let base = static_min_weight_base(oracle, &weights)?;
        for e in &base {
            *loads.get_mut(e).expect("base element is in the ground set") += 1;
        }
        bases.push(base);
    }
    Ok(StaticCollection { bases, loads })
}

/// Rank of every subset of a small ground set, indexed by bitmask over the
/// id-sorted elements.
#[derive(Clone, Debug)]
pub struct RankTable {
    elems: Vec<ElementId>,
    ranks: Vec<u8>,
}

impl RankTable {
    pub fn new<O: RankOracle>(oracle: &O) -> Result<Self, OracleError> {
        Self::with_cap(oracle, ORACLE_CAP)
    }

    fn with_cap<O: RankOracle>(oracle: &O, cap: usize) -> Result<Self, OracleError> {
        let elems = oracle.ground_set();
        let n = elems.len();
        if n > cap {
            return Err(OracleError::CapExceeded { n, cap });
        }
        let mut ranks = vec![0u8; 1 << n];
        for (mask, slot) in ranks.iter_mut().enumerate().skip(1) {
            let set = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| elems[i]);
            *slot = oracle.rank(set)? as u8;
        }
        Ok(RankTable { elems, ranks })
    }

    pub fn elements(&self) -> &[ElementId] {
        &self.elems
    }

    pub fn full_mask(&self) -> u32 {
        ((1u64 << self.elems.len()) - 1) as u32
    }

    pub fn rank(&self, mask: u32) -> usize {
        self.ranks[mask as usize] as usize
    }

    pub fn mask_of(&self, set: &BTreeSet<ElementId>) -> u32 {
        self.elems
            .iter()
            .enumerate()
            .filter(|(_, e)| set.contains(e))
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn set_of(&self, mask: u32) -> Base {
        (0..self.elems.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.elems[i])
            .collect()
    }

    pub fn has_loop(&self) -> bool {
        (0..self.elems.len()).any(|i| self.rank(1 << i) == 0)
    }

    /// Packing number of the restriction to `within`.
    pub fn packing_number_of(&self, within: u32) -> Estimate {
        self.phi_minimizer(within, TieBreak::Canonical)
            .map_or(Estimate::Infinite, |(_, phi)| Estimate::Finite(phi))
    }

    pub fn packing_number(&self) -> Estimate {
        self.packing_number_of(self.full_mask())
    }

    pub fn covering_number(&self) -> Result<Estimate, OracleError> {
        if self.elems.is_empty() || self.has_loop() {
            return Err(OracleError::UndefinedCovering);
        }
        let best = submasks(self.full_mask())
            .map(|a| Rational::new(a.count_ones() as i64, self.rank(a) as i64))
            .max()
            .expect("ground set is nonempty");
        Ok(Estimate::Finite(best))
    }

    /// Minimizer of `|A| / (rk(S) - rk(S \ A))` over `A ⊆ S` with
    /// `rk(S \ A) < rk(S)`, and the minimum. `None` when `rk(S) = 0`.
    fn phi_minimizer(&self, within: u32, tie: TieBreak) -> Option<(u32, Rational)> {
        let total = self.rank(within);
        let mut best: Option<(u32, Rational)> = None;
        for a in submasks(within) {
            let drop = total - self.rank(within & !a);
            if drop == 0 {
                continue;
            }
            let value = Rational::new(a.count_ones() as i64, drop as i64);
            let better = match best {
                None => true,
                Some((b, v)) => value < v || (value == v && tie.prefers(a, b)),
            };
            if better {
                best = Some((a, value));
            }
        }
        best
    }

    pub fn ideal_loads(&self, tie: TieBreak) -> Result<IdealLoads, OracleError> {
        if self.has_loop() {
            return Err(OracleError::UndefinedCovering);
        }
        let mut rest = self.full_mask();
        let mut levels = Vec::new();
        let mut loads = BTreeMap::new();
        while rest != 0 {
            let (a, phi) = self
                .phi_minimizer(rest, tie)
                .expect("loop-free nonempty set has positive rank");
            for e in self.set_of(a) {
                loads.insert(e, phi.recip());
            }
            levels.push(IdealLevel {
                set: self.set_of(a),
                phi,
            });
            rest &= !a;
        }
        Ok(IdealLoads { loads, levels })
    }

    /// Every base, as masks.
    pub fn bases(&self) -> Vec<u32> {
        let r = self.rank(self.full_mask());
        (0..=self.full_mask())
            .filter(|&m| m.count_ones() as usize == r && self.rank(m) == r)
            .collect()
    }

    /// Every base of minimum total weight, ties allowed.
    pub fn min_weight_bases(&self, weight: impl Fn(ElementId) -> u64) -> Vec<Base> {
        let cost = |m: u32| -> u64 { self.set_of(m).into_iter().map(&weight).sum() };
        let bases = self.bases();
        let best = bases.iter().map(|&m| cost(m)).min().unwrap_or(0);
        bases
            .into_iter()
            .filter(|&m| cost(m) == best)
            .map(|m| self.set_of(m))
            .collect()
    }
}

/// Which minimizer to pick when several sets attain the packing number.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    /// Smallest cardinality, then lexicographically smallest.
    Canonical,
    /// Largest cardinality, then lexicographically largest.
    Reversed,
}

impl TieBreak {
    fn prefers(self, a: u32, b: u32) -> bool {
        let (ca, cb) = (a.count_ones(), b.count_ones());
        // With equal cardinality, the lower id-sorted list owns the lowest
        // differing bit.
        let a_lex_smaller = (a ^ b) != 0 && a & (a ^ b) & (a ^ b).wrapping_neg() != 0;
        match self {
            TieBreak::Canonical => ca < cb || (ca == cb && a_lex_smaller),
            TieBreak::Reversed => ca > cb || (ca == cb && a != b && !a_lex_smaller),
        }
    }
}

/// Nonempty submasks of `mask`.
fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask).filter(|&m| m != 0);
    std::iter::from_fn(move || {
        let cur = next?;
        let following = (cur - 1) & mask;
        next = Some(following).filter(|&m| m != 0);
        Some(cur)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealLevel {
    pub set: Base,
    pub phi: Rational,
}

/// `ℓ*`: each recursion level hands `1/Φ` of the current restriction to
/// the minimizing set and recurses on the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealLoads {
    pub loads: BTreeMap<ElementId, Rational>,
    pub levels: Vec<IdealLevel>,
}

impl IdealLoads {
    pub fn max_load(&self) -> Option<Rational> {
        self.loads.values().max().copied()
    }

    pub fn min_load(&self) -> Option<Rational> {
        self.loads.values().min().copied()
    }
}

pub fn packing_number<O: RankOracle>(oracle: &O) -> Result<Estimate, OracleError> {
    Ok(RankTable::new(oracle)?.packing_number())
}

pub fn covering_number<O: RankOracle>(oracle: &O) -> Result<Estimate, OracleError> {
    RankTable::new(oracle)?.covering_number()
}

pub fn ideal_loads<O: RankOracle>(oracle: &O) -> Result<IdealLoads, OracleError> {
    RankTable::new(oracle)?.ideal_loads(TieBreak::Canonical)
}

/// `k` pairwise-disjoint bases, or `None` when no such packing exists.
pub fn pack_disjoint_bases<O: RankOracle>(
    oracle: &O,
    k: usize,
) -> Result<Option<Vec<Base>>, OracleError> {
    let table = RankTable::with_cap(oracle, PACKING_SEARCH_CAP)?;
    Ok(table.pack_disjoint(k))
}

impl RankTable {
    fn pack_disjoint(&self, k: usize) -> Option<Vec<Base>> {
        let r = self.rank(self.full_mask());
        let n = self.elems.len();
        if k * r > n {
            return None;
        }
        let bases = self.bases();
        let mut chosen = Vec::with_capacity(k);
        if search_disjoint(&bases, 0, 0, k, r, n, &mut chosen) {
            Some(chosen.into_iter().map(|m| self.set_of(m)).collect())
        } else {
            None
        }
    }
}

fn search_disjoint(
    bases: &[u32],
    start: usize,
    used: u32,
    k: usize,
    r: usize,
    n: usize,
    chosen: &mut Vec<u32>,
) -> bool {
    if chosen.len() == k {
        return true;
    }
    let left = k - chosen.len();
    if (n - used.count_ones() as usize) < left * r {
        return false;
    }
    for (i, &b) in bases.iter().enumerate().skip(start) {
        // Rank 0: the empty base is disjoint from itself.
        if b & used != 0 {
            continue;
        }
        chosen.push(b);
        let next = if r == 0 { i } else { i + 1 };
        if search_disjoint(bases, next, used | b, k, r, n, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// `M|A`: the same rank function on subsets of `A`.
pub struct Restricted<'a, O> {
    oracle: &'a O,
    subset: BTreeSet<ElementId>,
}

pub fn restrict<'a, O: RankOracle>(
    oracle: &'a O,
    subset: &BTreeSet<ElementId>,
) -> Result<Restricted<'a, O>, OracleError> {
    check_subset(oracle, subset)?;
    Ok(Restricted {
        oracle,
        subset: subset.clone(),
    })
}

impl<O: RankOracle> RankOracle for Restricted<'_, O> {
    fn rank<I>(&self, set: I) -> Result<usize, MatroidError>
    where
        I: IntoIterator<Item = ElementId>,
    {
        let items: Vec<ElementId> = set.into_iter().collect();
        if let Some(bad) = items.iter().find(|e| !self.subset.contains(e)) {
            return Err(MatroidError::UnknownElement(*bad));
        }
        self.oracle.rank(items)
    }

    fn ground_set(&self) -> Vec<ElementId> {
        self.subset.iter().copied().collect()
    }
}

/// `M·A`: `rk(X) = rk_M(X ∪ B) - rk_M(B)` for a fixed base `B` of `M|Ā`.
pub struct Contracted<'a, O> {
    oracle: &'a O,
    subset: BTreeSet<ElementId>,
    complement_base: Base,
    complement_rank: usize,
}

impl<O> Contracted<'_, O> {
    pub fn complement_base(&self) -> &Base {
        &self.complement_base
    }
}

/// Contraction to `subset`, with the complement base chosen by the greedy
/// algorithm in id order.
pub fn contract<'a, O: RankOracle>(
    oracle: &'a O,
    subset: &BTreeSet<ElementId>,
) -> Result<Contracted<'a, O>, OracleError> {
    check_subset(oracle, subset)?;
    let complement: BTreeSet<ElementId> = oracle
        .ground_set()
        .into_iter()
        .filter(|e| !subset.contains(e))
        .collect();
    let view = restrict(oracle, &complement)?;
    let base = static_min_weight_base(&view, &BTreeMap::new())?;
    contract_with_base(oracle, subset, base)
}

pub fn contract_with_base<'a, O: RankOracle>(
    oracle: &'a O,
    subset: &BTreeSet<ElementId>,
    complement_base: Base,
) -> Result<Contracted<'a, O>, OracleError> {
    check_subset(oracle, subset)?;
    if complement_base.iter().any(|e| subset.contains(e)) {
        return Err(OracleError::NotABase);
    }
    let complement: Vec<ElementId> = oracle
        .ground_set()
        .into_iter()
        .filter(|e| !subset.contains(e))
        .collect();
    let complement_rank = oracle.rank(complement_base.iter().copied())?;
    if complement_rank != complement_base.len() || oracle.rank(complement)? != complement_rank {
        return Err(OracleError::NotABase);
    }
    Ok(Contracted {
        oracle,
        subset: subset.clone(),
        complement_base,
        complement_rank,
    })
}

impl<O: RankOracle> RankOracle for Contracted<'_, O> {
    fn rank<I>(&self, set: I) -> Result<usize, MatroidError>
    where
        I: IntoIterator<Item = ElementId>,
    {
        let items: Vec<ElementId> = set.into_iter().collect();
        if let Some(bad) = items.iter().find(|e| !self.subset.contains(e)) {
            return Err(MatroidError::UnknownElement(*bad));
        }
        let r = self.oracle.rank(
            items
                .into_iter()
                .chain(self.complement_base.iter().copied()),
        )?;
        Ok(r - self.complement_rank)
    }

    fn ground_set(&self) -> Vec<ElementId> {
        self.subset.iter().copied().collect()
    }
}

fn check_subset<O: RankOracle>(
    oracle: &O,
    subset: &BTreeSet<ElementId>,
) -> Result<(), OracleError> {
    let ground: BTreeSet<ElementId> = oracle.ground_set().into_iter().collect();
    match subset.iter().find(|e| !ground.contains(e)) {
        Some(bad) => Err(OracleError::NotSubset(*bad)),
        None => Ok(()),
    }
}
