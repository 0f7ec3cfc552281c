//! Dynamic matroids behind a counted rank oracle.
//!
//! A [`DynamicMatroid`] owns the current ground set and answers rank queries
//! for one of four concrete families. Every rank evaluation bumps the
//! [`QueryCounter`]; that count is the cost measure for everything built on
//! top of it.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Element identifier. Ids are never reused for a different element within
/// one trace; the id order is the tie-break order for equal weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A vector over GF(2), written most significant coordinate first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    pub bits: u64,
    pub dim: u8,
}

impl BitVector {
    pub fn new(bits: u64, dim: u8) -> Self {
        assert!(dim <= 64, "dimension above 64");
        assert!(dim == 64 || bits >> dim == 0, "bits exceed dimension");
        BitVector { bits, dim }
    }

    /// Parses a string like `"0110"`.
    pub fn parse(s: &str) -> Option<Self> {
        if s.is_empty() || s.len() > 64 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return None;
        }
        let bits = u64::from_str_radix(s, 2).ok()?;
        Some(BitVector {
            bits,
            dim: s.len() as u8,
        })
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.dim).rev() {
            f.write_str(if self.bits >> i & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BitVector::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad bit string `{s}`")))
    }
}

/// What an inserted element is, in terms of its family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementDescriptor {
    Plain,
    /// Graph edge; `u == v` is a self-loop and has rank 0.
    Edge {
        u: u32,
        v: u32,
    },
    Vector {
        bits: BitVector,
    },
    Block {
        block: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MatroidFamily {
    /// `rk(A) = min(|A|, rank)`.
    Uniform { rank: usize },
    /// `rk(A) = sum over blocks of min(|A ∩ block|, capacity)`.
    Partition { capacities: BTreeMap<u32, usize> },
    /// Forests of a multigraph.
    Graphic,
    /// Linear independence over GF(2) in dimension `dim <= 64`.
    BinaryLinear { dim: u8 },
}

impl MatroidFamily {
    fn accepts(&self, desc: &ElementDescriptor) -> bool {
        match (self, desc) {
            (MatroidFamily::Uniform { .. }, ElementDescriptor::Plain) => true,
            (MatroidFamily::Partition { capacities }, ElementDescriptor::Block { block }) => {
                capacities.contains_key(block)
            }
            (MatroidFamily::Graphic, ElementDescriptor::Edge { .. }) => true,
            (MatroidFamily::BinaryLinear { dim }, ElementDescriptor::Vector { bits }) => {
                bits.dim == *dim
            }
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MatroidFamily::Uniform { .. } => "uniform",
            MatroidFamily::Partition { .. } => "partition",
            MatroidFamily::Graphic => "graphic",
            MatroidFamily::BinaryLinear { .. } => "binary",
        }
    }
}

impl fmt::Display for MatroidFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatroidFamily::Uniform { rank } => write!(f, "uniform:{rank}"),
            MatroidFamily::Partition { capacities } => {
                f.write_str("partition:")?;
                let caps: Vec<String> =
                    capacities.iter().map(|(b, c)| format!("{b}={c}")).collect();
                f.write_str(&caps.join(","))
            }
            MatroidFamily::Graphic => f.write_str("graphic"),
            MatroidFamily::BinaryLinear { dim } => write!(f, "binary:{dim}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatroidError {
    #[error("element {0} is not in the ground set")]
    UnknownElement(ElementId),
    #[error("element {0} is already in the ground set")]
    DuplicateElement(ElementId),
    #[error("ground set already holds the maximum of {0} elements")]
    CapacityExceeded(usize),
    #[error("descriptor {desc:?} does not belong to family {family}")]
    DescriptorMismatch {
        family: String,
        desc: ElementDescriptor,
    },
    #[error("element {0} was inserted earlier with a different descriptor")]
    DescriptorChanged(ElementId),
}

/// Rank-query accounting. Interior mutability lets read-only rank queries
/// be counted; the structure is single-threaded by construction.
#[derive(Clone, Debug, Default)]
pub struct QueryCounter {
    total: Cell<u64>,
    per_update: Cell<u64>,
}

impl QueryCounter {
    fn bump(&self) {
        self.total.set(self.total.get() + 1);
        self.per_update.set(self.per_update.get() + 1);
    }

    pub fn total(&self) -> u64 {
        self.total.get()
    }

    pub fn per_update(&self) -> u64 {
        self.per_update.get()
    }

    pub fn reset_per_update(&self) {
        self.per_update.set(0);
    }
}

/// Anything that answers rank queries over a ground set of [`ElementId`]s.
///
/// The argument is a duplicate-free iterator, so callers can describe a set
/// (say, a prefix of a sorted order plus one element) without building it.
pub trait RankOracle {
    fn rank<I>(&self, set: I) -> Result<usize, MatroidError>
    where
        I: IntoIterator<Item = ElementId>;

    /// Current ground set in ascending id order.
    fn ground_set(&self) -> Vec<ElementId>;
}

#[derive(Clone, Debug)]
pub struct DynamicMatroid {
    family: MatroidFamily,
    elements: HashMap<ElementId, ElementDescriptor>,
    seen: HashMap<ElementId, ElementDescriptor>,
    n_max: usize,
    counter: QueryCounter,
}

impl DynamicMatroid {
    pub fn new(family: MatroidFamily, n_max: usize) -> Self {
        DynamicMatroid {
            family,
            elements: HashMap::new(),
            seen: HashMap::new(),
            n_max,
            counter: QueryCounter::default(),
        }
    }

    pub fn family(&self) -> &MatroidFamily {
        &self.family
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `max(1, ln n_max)`: the logarithm used by every size formula.
    pub fn log_n(&self) -> f64 {
        log_n(self.n_max)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.elements.contains_key(&id)
    }

    pub fn descriptor(&self, id: ElementId) -> Option<&ElementDescriptor> {
        self.elements.get(&id)
    }

    pub fn counter(&self) -> &QueryCounter {
        &self.counter
    }

    pub fn insert_element(
        &mut self,
        id: ElementId,
        desc: ElementDescriptor,
    ) -> Result<(), MatroidError> {
        if self.elements.contains_key(&id) {
            return Err(MatroidError::DuplicateElement(id));
        }
        if self.elements.len() >= self.n_max {
            return Err(MatroidError::CapacityExceeded(self.n_max));
        }
        if !self.family.accepts(&desc) {
            return Err(MatroidError::DescriptorMismatch {
                family: self.family.to_string(),
                desc,
            });
        }
        if let Some(prev) = self.seen.get(&id) {
            if *prev != desc {
                return Err(MatroidError::DescriptorChanged(id));
            }
        } else {
            self.seen.insert(id, desc.clone());
        }
        self.elements.insert(id, desc);
        Ok(())
    }

    pub fn delete_element(&mut self, id: ElementId) -> Result<ElementDescriptor, MatroidError> {
        self.elements
            .remove(&id)
            .ok_or(MatroidError::UnknownElement(id))
    }

    /// Rank of the whole ground set.
    pub fn full_rank(&self) -> usize {
        let all = self.ground_set();
        self.rank(all).expect("ground set elements are present")
    }

    /// `{ e in E : rk(A) = rk(A + e) }`, using at most `|E| + 1` queries.
    pub fn span(&self, set: &[ElementId]) -> Result<BTreeSet<ElementId>, MatroidError> {
        let base_rank = self.rank(set.iter().copied())?;
        let inside: BTreeSet<ElementId> = set.iter().copied().collect();
        let mut out = inside.clone();
        for e in self.ground_set() {
            if inside.contains(&e) {
                continue;
            }
            let r = self.rank(set.iter().copied().chain(std::iter::once(e)))?;
            if r == base_rank {
                out.insert(e);
            }
        }
        Ok(out)
    }

    fn lookup(&self, id: ElementId) -> Result<&ElementDescriptor, MatroidError> {
        self.elements
            .get(&id)
            .ok_or(MatroidError::UnknownElement(id))
    }
}

pub fn log_n(n: usize) -> f64 {
    (n.max(1) as f64).ln().max(1.0)
}

impl RankOracle for DynamicMatroid {
    fn rank<I>(&self, set: I) -> Result<usize, MatroidError>
    where
        I: IntoIterator<Item = ElementId>,
    {
        let rank = match &self.family {
            MatroidFamily::Uniform { rank } => {
                let mut count = 0usize;
                for id in set {
                    self.lookup(id)?;
                    count += 1;
                }
                count.min(*rank)
            }
            MatroidFamily::Partition { capacities } => {
                let mut counts: HashMap<u32, usize> = HashMap::new();
                for id in set {
                    if let ElementDescriptor::Block { block } = self.lookup(id)? {
                        *counts.entry(*block).or_default() += 1;
                    }
                }
                counts
                    .iter()
                    .map(|(b, c)| (*c).min(capacities.get(b).copied().unwrap_or(0)))
                    .sum()
            }
            MatroidFamily::Graphic => {
                let mut forest = Forest::default();
                let mut rank = 0;
                for id in set {
                    if let ElementDescriptor::Edge { u, v } = self.lookup(id)? {
                        if forest.union(*u, *v) {
                            rank += 1;
                        }
                    }
                }
                rank
            }
            MatroidFamily::BinaryLinear { .. } => {
                let mut basis = [0u64; 64];
                let mut rank = 0;
                for id in set {
                    if let ElementDescriptor::Vector { bits } = self.lookup(id)? {
                        if reduce_into(&mut basis, bits.bits) {
                            rank += 1;
                        }
                    }
                }
                rank
            }
        };
        self.counter.bump();
        Ok(rank)
    }

    fn ground_set(&self) -> Vec<ElementId> {
        let mut ids: Vec<ElementId> = self.elements.keys().copied().collect();
        ids.sort_unstable();
        ids
    }
}

/// Gaussian elimination step: reduces `v` against `basis` (indexed by
/// leading bit) and stores the remainder if nonzero.
fn reduce_into(basis: &mut [u64; 64], mut v: u64) -> bool {
    while v != 0 {
        let top = 63 - v.leading_zeros() as usize;
        if basis[top] == 0 {
            basis[top] = v;
            return true;
        }
        v ^= basis[top];
    }
    false
}

/// Union-find over the vertices touched by one query.
#[derive(Default)]
struct Forest {
    index: HashMap<u32, usize>,
    parent: Vec<usize>,
}

impl Forest {
    fn node(&mut self, v: u32) -> usize {
        let next = self.parent.len();
        let idx = *self.index.entry(v).or_insert(next);
        if idx == next {
            self.parent.push(next);
        }
        idx
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the endpoints; false when they were already connected.
    fn union(&mut self, u: u32, v: u32) -> bool {
        let (a, b) = (self.node(u), self.node(v));
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u64]) -> Vec<ElementId> {
        v.iter().map(|&i| ElementId(i)).collect()
    }

    fn graphic(edges: &[(u32, u32)]) -> DynamicMatroid {
        let mut m = DynamicMatroid::new(MatroidFamily::Graphic, 64);
        for (i, &(u, v)) in edges.iter().enumerate() {
            m.insert_element(ElementId(i as u64), ElementDescriptor::Edge { u, v })
                .unwrap();
        }
        m
    }

    fn binary(vectors: &[&str]) -> DynamicMatroid {
        let dim = vectors[0].len() as u8;
        let mut m = DynamicMatroid::new(MatroidFamily::BinaryLinear { dim }, 64);
        for (i, s) in vectors.iter().enumerate() {
            let bits = BitVector::parse(s).unwrap();
            m.insert_element(ElementId(i as u64), ElementDescriptor::Vector { bits })
                .unwrap();
        }
        m
    }

    #[test]
    fn uniform_rank_caps() {
        let mut m = DynamicMatroid::new(MatroidFamily::Uniform { rank: 2 }, 8);
        for i in 0..3 {
            m.insert_element(ElementId(i), ElementDescriptor::Plain)
                .unwrap();
        }
        assert_eq!(m.rank(ids(&[0, 1, 2])).unwrap(), 2);
        assert_eq!(m.rank(ids(&[1])).unwrap(), 1);
        assert_eq!(m.rank(Vec::new()).unwrap(), 0);
    }

    #[test]
    fn triangle_rank_and_span() {
        let m = graphic(&[(1, 2), (1, 3), (2, 3)]);
        assert_eq!(m.rank(ids(&[0, 1, 2])).unwrap(), 2);
        assert!(m.span(&[]).unwrap().is_empty());
        assert_eq!(
            m.span(&ids(&[0, 1])).unwrap(),
            ids(&[0, 1, 2]).into_iter().collect()
        );
    }

    #[test]
    fn binary_rank_and_span() {
        let m = binary(&["001", "010", "011"]);
        assert_eq!(m.rank(ids(&[0, 1, 2])).unwrap(), 2);
        assert_eq!(m.span(&ids(&[0])).unwrap(), ids(&[0]).into_iter().collect());
        let mut m = binary(&["001", "010"]);
        m.insert_element(
            ElementId(9),
            ElementDescriptor::Vector {
                bits: BitVector::parse("100").unwrap(),
            },
        )
        .unwrap();
        assert_eq!(m.full_rank(), 3);
    }

    #[test]
    fn partition_rank_sums_capped_blocks() {
        let caps = BTreeMap::from([(0, 1), (1, 2), (2, 0)]);
        let mut m = DynamicMatroid::new(MatroidFamily::Partition { capacities: caps }, 8);
        for (i, b) in [0, 0, 1, 1, 1, 2].into_iter().enumerate() {
            m.insert_element(ElementId(i as u64), ElementDescriptor::Block { block: b })
                .unwrap();
        }
        assert_eq!(m.full_rank(), 3);
        assert_eq!(m.rank(ids(&[5])).unwrap(), 0);
        assert_eq!(m.rank(ids(&[0, 2])).unwrap(), 2);
    }

    #[test]
    fn insert_examples() {
        let mut m = DynamicMatroid::new(MatroidFamily::Uniform { rank: 1 }, 4);
        m.insert_element(ElementId(0), ElementDescriptor::Plain)
            .unwrap();
        assert_eq!(m.rank(ids(&[0])).unwrap(), 1);
        m.delete_element(ElementId(0)).unwrap();
        assert_eq!(m.rank(Vec::new()).unwrap(), 0);

        let mut m = graphic(&[(1, 2), (1, 3)]);
        m.insert_element(ElementId(7), ElementDescriptor::Edge { u: 1, v: 2 })
            .unwrap();
        assert_eq!(m.full_rank(), 2);
    }

    #[test]
    fn delete_restricts() {
        let mut m = graphic(&[(1, 2), (1, 3), (2, 3)]);
        m.delete_element(ElementId(2)).unwrap();
        assert_eq!(m.rank(ids(&[0, 1])).unwrap(), 2);
        assert_eq!(
            m.rank(ids(&[2])),
            Err(MatroidError::UnknownElement(ElementId(2)))
        );
    }

    #[test]
    fn self_loops_and_zero_vectors_have_rank_zero() {
        let m = graphic(&[(4, 4)]);
        assert_eq!(m.full_rank(), 0);
        let m = binary(&["000", "001"]);
        assert_eq!(m.rank(ids(&[0])).unwrap(), 0);
        assert_eq!(m.full_rank(), 1);
    }

    #[test]
    fn insertion_errors() {
        let mut m = DynamicMatroid::new(MatroidFamily::Uniform { rank: 1 }, 1);
        m.insert_element(ElementId(0), ElementDescriptor::Plain)
            .unwrap();
        assert_eq!(
            m.insert_element(ElementId(0), ElementDescriptor::Plain),
            Err(MatroidError::DuplicateElement(ElementId(0)))
        );
        assert_eq!(
            m.insert_element(ElementId(1), ElementDescriptor::Plain),
            Err(MatroidError::CapacityExceeded(1))
        );
        m.delete_element(ElementId(0)).unwrap();
        assert!(matches!(
            m.insert_element(ElementId(1), ElementDescriptor::Edge { u: 0, v: 1 }),
            Err(MatroidError::DescriptorMismatch { .. })
        ));
        assert_eq!(
            m.delete_element(ElementId(5)),
            Err(MatroidError::UnknownElement(ElementId(5)))
        );

        let mut g = DynamicMatroid::new(MatroidFamily::Graphic, 4);
        g.insert_element(ElementId(0), ElementDescriptor::Edge { u: 0, v: 1 })
            .unwrap();
        g.delete_element(ElementId(0)).unwrap();
        assert_eq!(
            g.insert_element(ElementId(0), ElementDescriptor::Edge { u: 0, v: 2 }),
            Err(MatroidError::DescriptorChanged(ElementId(0)))
        );
        g.insert_element(ElementId(0), ElementDescriptor::Edge { u: 0, v: 1 })
            .unwrap();
    }

    #[test]
    fn counter_counts_every_evaluation() {
        let m = graphic(&[(1, 2), (2, 3)]);
        let before = m.counter().total();
        m.rank(ids(&[0])).unwrap();
        m.rank(ids(&[0, 1])).unwrap();
        m.counter().reset_per_update();
        m.rank(ids(&[1])).unwrap();
        assert_eq!(m.counter().total() - before, 3);
        assert_eq!(m.counter().per_update(), 1);
    }

    #[test]
    fn descriptor_json_shape() {
        let desc = ElementDescriptor::Vector {
            bits: BitVector::parse("0101").unwrap(),
        };
        assert_eq!(
            serde_json::to_string(&desc).unwrap(),
            r#"{"kind":"vector","bits":"0101"}"#
        );
        let edge: ElementDescriptor =
            serde_json::from_str(r#"{"kind":"edge","u":1,"v":2}"#).unwrap();
        assert_eq!(edge, ElementDescriptor::Edge { u: 1, v: 2 });
    }
}
