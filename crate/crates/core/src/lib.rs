//! Dynamic matroid algorithms over a counted rank oracle.
//!
//! * [`matroid`]: ground set, element descriptors, four matroid families and
//!   the rank oracle with query accounting.
//! * [`min_base`]: minimum-weight base maintained under insertions,
//!   deletions and weight changes with `O(log(Wn))` queries per update.
//! * [`collection`]: greedy base collections kept in sync level by level.
//! * [`packing`] and [`covering`]: `(1 ± ε)` estimators of the fractional
//!   packing and covering numbers.
//! * [`oracle`]: brute-force ground truth for small instances.
//! * [`harness`]: trace files, replay, verification and benchmarking.

pub mod collection;
pub mod covering;
pub mod estimator;
pub mod harness;
pub mod matroid;
pub mod min_base;
pub mod oracle;
pub mod packing;
pub mod value;

pub use matroid::{
    BitVector, DynamicMatroid, ElementDescriptor, ElementId, MatroidError, MatroidFamily,
    RankOracle,
};
pub use min_base::{Base, CompositeWeight, MinBaseState, SwapReport};
pub use value::{Estimate, Rational};
