//! Pieces shared by the packing and covering estimators.

use thiserror::Error;

use crate::collection::{CollectionError, GreedyCollection, RecourseReport, Update};
use crate::matroid::{log_n, DynamicMatroid, ElementId, MatroidError, RankOracle};
use crate::value::{Estimate, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error(transparent)]
    Matroid(#[from] MatroidError),
}

/// A dynamic estimator driven one trace update at a time.
pub trait Estimator {
    fn name(&self) -> &'static str;

    /// Applies `update` to `m` and to the estimator and returns the new
    /// estimate.
    fn apply(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Estimate, EstimatorError>;

    /// Last reported value; no rank queries.
    fn estimate(&self) -> Estimate;
}

/// `ε / (1 + ε)`.
pub fn eps_prime(eps: Rational) -> Rational {
    eps / (Rational::from_integer(1) + eps)
}

/// `⌈3 · bound · ln(n_max) / ε′²⌉`.
pub fn collection_size(eps: Rational, bound: u64, n_max: usize) -> usize {
    let ep = eps_prime(eps);
    let factor = Rational::from_integer(3 * bound as i64) / (ep * ep);
    (crate::value::rational_to_f64(factor) * log_n(n_max)).ceil() as usize
}

/// Rank of `set`, without a query when it is empty.
pub fn rank_of<O: RankOracle>(oracle: &O, set: &[ElementId]) -> Result<usize, MatroidError> {
    if set.is_empty() {
        return Ok(0);
    }
    oracle.rank(set.iter().copied())
}

pub(crate) fn check_eps(eps: Rational) -> Result<(), EstimatorError> {
    if eps <= Rational::from_integer(0) || eps >= Rational::new(1, 2) {
        return Err(EstimatorError::InvalidConfig(format!(
            "eps must lie in (0, 1/2), got {eps}"
        )));
    }
    Ok(())
}

/// What [`Tracked::insert`] and [`Tracked::delete`] did.
#[derive(Clone, Debug, Default)]
pub struct Applied {
    pub report: RecourseReport,
    /// The update changed the rank of the tracked set and took the
    /// zero-recourse path.
    pub rank_changed: bool,
}

/// A collection plus the cached rank of its element set, so that updates
/// which change the rank skip the level-by-level search.
#[derive(Clone, Debug, Default)]
pub struct Tracked {
    pub collection: GreedyCollection,
    rank: usize,
}

impl Tracked {
    pub fn new(collection: GreedyCollection, rank: usize) -> Self {
        Tracked { collection, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Inserts `e`, which must already be in the oracle.
    pub fn insert<O: RankOracle>(
        &mut self,
        oracle: &O,
        e: ElementId,
    ) -> Result<Applied, EstimatorError> {
        let members = self.collection.members();
        let r = oracle.rank(members.iter().copied().chain(std::iter::once(e)))?;
        if r > self.rank {
            self.rank = r;
            let report = self.collection.insert_coloop(e)?;
            assert_eq!(
                self.collection.load(e),
                Some(self.collection.synced() as u64),
                "coloop must be in every base"
            );
            return Ok(Applied {
                report,
                rank_changed: true,
            });
        }
        let report = self.collection.insert(oracle, e)?;
        Ok(Applied {
            report,
            rank_changed: false,
        })
    }

    /// Deletes `e`, which must still be in the oracle.
    pub fn delete<O: RankOracle>(
        &mut self,
        oracle: &O,
        e: ElementId,
    ) -> Result<Applied, EstimatorError> {
        let members = self.collection.members();
        if !members.contains(&e) {
            return Err(CollectionError::Unknown(e).into());
        }
        let rest: Vec<ElementId> = members.iter().copied().filter(|&x| x != e).collect();
        let r = rank_of(oracle, &rest)?;
        if r < self.rank {
            assert_eq!(
                self.collection.load(e),
                Some(self.collection.synced() as u64),
                "coloop must be in every base"
            );
            self.rank = r;
            let report = self.collection.delete_coloop(e)?;
            return Ok(Applied {
                report,
                rank_changed: true,
            });
        }
        let report = self.collection.delete(oracle, e)?;
        Ok(Applied {
            report,
            rank_changed: false,
        })
    }
}
