//! `(1 ± ε)` estimates of the fractional covering number `β`.
//!
//! [`CoveringEstimatorDet`] reports `1 / min ℓ(e)` over a greedy collection
//! of `⌈3·β_max·ln(n_max)/ε′²⌉` bases. [`SampledCoveringEstimator`] needs no
//! bound on `β`: it keeps one unsampled collection for small values and, for
//! each scale `2^i`, a collection over a random subset `E_i` that holds each
//! element with probability `p_i`. The previous estimate picks the scale.

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collection::{GreedyCollection, RecourseReport, Update};
use crate::estimator::{check_eps, collection_size, rank_of, Estimator, EstimatorError, Tracked};
use crate::matroid::{DynamicMatroid, ElementId, RankOracle};
use crate::value::{rational_to_f64, Estimate, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoveringConfig {
    pub eps: Rational,
    pub beta_max: u64,
}

/// Rank-0 elements seen by a covering estimator. While any is present the
/// covering number is undefined and the estimate is `+inf`.
#[derive(Clone, Debug, Default)]
struct Loops(BTreeSet<ElementId>);

impl Loops {
    /// Inserts `e` into `m` and reports whether it is a loop.
    fn insert(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Option<ElementId>, EstimatorError> {
        let Update::Insert(e, desc) = update else {
            return Ok(None);
        };
        m.insert_element(*e, desc.clone())?;
        if m.rank([*e])? == 0 {
            self.0.insert(*e);
            return Ok(None);
        }
        Ok(Some(*e))
    }

    fn remove(&mut self, e: ElementId) -> bool {
        self.0.remove(&e)
    }

    fn any(&self) -> bool {
        !self.0.is_empty()
    }
}

fn min_load_estimate(c: &GreedyCollection) -> Estimate {
    match c.min_load() {
        Some((l, _)) if c.synced() > 0 => Estimate::ratio(c.synced() as u64, l),
        _ => Estimate::Infinite,
    }
}

#[derive(Clone, Debug)]
pub struct CoveringEstimatorDet {
    k: usize,
    tracked: Tracked,
    loops: Loops,
    estimate: Estimate,
    last: RecourseReport,
}

impl CoveringEstimatorDet {
    pub fn new(m: &DynamicMatroid, config: CoveringConfig) -> Result<Self, EstimatorError> {
        check_eps(config.eps)?;
        if config.beta_max == 0 {
            return Err(EstimatorError::InvalidConfig(
                "beta_max must be at least 1".into(),
            ));
        }
        Self::with_levels(m, collection_size(config.eps, config.beta_max, m.n_max()))
    }

    /// A collection of exactly `k` levels over the elements of `m`.
    pub fn with_levels(m: &DynamicMatroid, k: usize) -> Result<Self, EstimatorError> {
        let mut loops = Loops::default();
        let mut members = Vec::new();
        for e in m.ground_set() {
            if m.rank([e])? == 0 {
                loops.0.insert(e);
            } else {
                members.push(e);
            }
        }
        let rank = rank_of(m, &members)?;
        let collection = GreedyCollection::new(m, members, k)?;
        let mut est = CoveringEstimatorDet {
            k,
            tracked: Tracked::new(collection, rank),
            loops,
            estimate: Estimate::Infinite,
            last: RecourseReport::default(),
        };
        est.estimate = est.current();
        Ok(est)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn collection(&self) -> &GreedyCollection {
        &self.tracked.collection
    }

    pub fn last_recourse(&self) -> &RecourseReport {
        &self.last
    }

    pub fn is_unbounded(&self) -> bool {
        self.loops.any()
    }

    fn current(&self) -> Estimate {
        if self.loops.any() {
            return Estimate::Infinite;
        }
        min_load_estimate(&self.tracked.collection)
    }
}

impl Estimator for CoveringEstimatorDet {
    fn name(&self) -> &'static str {
        "cover-det"
    }

    fn apply(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Estimate, EstimatorError> {
        self.last = RecourseReport::default();
        match update {
            Update::Insert(..) => {
                if let Some(e) = self.loops.insert(m, update)? {
                    self.last = self.tracked.insert(m, e)?.report;
                }
            }
            Update::Delete(e) => {
                if !self.loops.remove(*e) {
                    self.last = self.tracked.delete(m, *e)?.report;
                }
                m.delete_element(*e)?;
            }
        }
        self.estimate = self.current();
        Ok(self.estimate)
    }

    fn estimate(&self) -> Estimate {
        self.estimate
    }
}

/// Coin biases are multiples of `2^-PROB_BITS`, so the coin and the
/// `1/p_i` rescaling use the same exact value.
pub const PROB_BITS: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SampledConfig {
    pub eps: Rational,
    /// The constant `c ≥ 2` of the failure probability.
    pub c: u32,
    pub seed: u64,
    /// Leading constant of `p_i`, `T0` and the per-level `β` cap.
    pub sampling_constant: f64,
}

impl SampledConfig {
    pub const DEFAULT_SAMPLING_CONSTANT: f64 = 24.0;

    pub fn new(eps: Rational, seed: u64) -> Self {
        SampledConfig {
            eps,
            c: 2,
            seed,
            sampling_constant: Self::DEFAULT_SAMPLING_CONSTANT,
        }
    }

    /// `T0 = const·c·ln(n_max)/ε²`.
    pub fn threshold(&self, log_n: f64) -> f64 {
        let eps = rational_to_f64(self.eps);
        self.sampling_constant * self.c as f64 * log_n / (eps * eps)
    }

    /// `⌈8·T0⌉`.
    pub fn beta_cap(&self, log_n: f64) -> u64 {
        (8.0 * self.threshold(log_n)).ceil() as u64
    }

    /// Bases per level, unsampled ones included.
    pub fn level_size(&self, n_max: usize) -> usize {
        collection_size(self.eps, self.beta_cap(crate::matroid::log_n(n_max)), n_max)
    }
}

/// The coin for `(level, element)`: a fixed position in a counter-based
/// stream, independent of the order in which updates arrive.
pub fn coin(seed: u64, level: u32, e: ElementId, p_num: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    rng.set_word_pos(e.0 as u128 * 2);
    let draw = (rng.next_u32() >> (32 - PROB_BITS)) as u64;
    draw < p_num
}

#[derive(Clone, Debug)]
pub struct SamplerLevel {
    pub index: u32,
    /// `p_i · 2^PROB_BITS`.
    pub p_num: u64,
    pub tracked: Tracked,
}

impl SamplerLevel {
    pub fn probability(&self) -> Rational {
        Rational::new(self.p_num as i64, 1 << PROB_BITS)
    }

    pub fn members(&self) -> &BTreeSet<ElementId> {
        self.tracked.collection.members()
    }

    /// `β_i / p_i` as estimated by this level.
    pub fn scaled_estimate(&self) -> Estimate {
        match min_load_estimate(&self.tracked.collection) {
            Estimate::Finite(r) => Estimate::Finite(r / self.probability()),
            Estimate::Infinite => Estimate::Infinite,
        }
    }
}

/// Where the last estimate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Unsampled,
    Level(u32),
}

#[derive(Clone, Debug)]
pub struct SampledCoveringEstimator {
    config: SampledConfig,
    t0: f64,
    k: usize,
    base: Tracked,
    levels: Vec<SamplerLevel>,
    loops: Loops,
    estimate: Estimate,
    source: Source,
    last_min_base_updates: usize,
}

impl SampledCoveringEstimator {
    pub fn new(m: &DynamicMatroid, config: SampledConfig) -> Result<Self, EstimatorError> {
        check_eps(config.eps)?;
        if config.c < 2 {
            return Err(EstimatorError::InvalidConfig(format!(
                "c must be at least 2, got {}",
                config.c
            )));
        }
        if config.sampling_constant.is_nan() || config.sampling_constant <= 0.0 {
            return Err(EstimatorError::InvalidConfig(
                "sampling constant must be positive".into(),
            ));
        }
        let t0 = config.threshold(m.log_n());
        let k = config.level_size(m.n_max());
        let top = (m.n_max().max(2) as f64).log2().ceil() as u32 + 1;
        let mut levels = Vec::new();
        for i in 0..=top {
            let p = t0 / 2f64.powi(i as i32);
            if p >= 1.0 {
                continue;
            }
            let p_num = ((p * (1u64 << PROB_BITS) as f64).round() as u64).max(1);
            levels.push(SamplerLevel {
                index: i,
                p_num,
                tracked: Tracked::default(),
            });
        }
        let mut est = SampledCoveringEstimator {
            config,
            t0,
            k,
            base: Tracked::default(),
            levels,
            loops: Loops::default(),
            estimate: Estimate::Infinite,
            source: Source::Unsampled,
            last_min_base_updates: 0,
        };
        let mut members = Vec::new();
        for e in m.ground_set() {
            if m.rank([e])? == 0 {
                est.loops.0.insert(e);
            } else {
                members.push(e);
            }
        }
        est.base = Tracked::new(
            GreedyCollection::new(m, members.iter().copied(), k)?,
            rank_of(m, &members)?,
        );
        let seed = est.config.seed;
        for level in &mut est.levels {
            let picked: Vec<ElementId> = members
                .iter()
                .copied()
                .filter(|&e| coin(seed, level.index, e, level.p_num))
                .collect();
            let rank = rank_of(m, &picked)?;
            level.tracked = Tracked::new(GreedyCollection::new(m, picked, k)?, rank);
        }
        est.estimate = est.select();
        Ok(est)
    }

    pub fn threshold(&self) -> f64 {
        self.t0
    }

    pub fn level_size(&self) -> usize {
        self.k
    }

    pub fn levels(&self) -> &[SamplerLevel] {
        &self.levels
    }

    pub fn unsampled(&self) -> &GreedyCollection {
        &self.base.collection
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn is_unbounded(&self) -> bool {
        self.loops.any()
    }

    /// Min-base updates over every collection during the last update.
    pub fn last_min_base_updates(&self) -> usize {
        self.last_min_base_updates
    }

    /// Picks the reporting collection from the previous estimate and
    /// records the choice.
    fn select(&mut self) -> Estimate {
        if self.loops.any() {
            self.source = Source::Unsampled;
            return Estimate::Infinite;
        }
        let source = match self.estimate {
            Estimate::Finite(v) if rational_to_f64(v) > self.t0 && !self.levels.is_empty() => {
                let i = rational_to_f64(v).log2().floor() as i64;
                let slot = self
                    .levels
                    .partition_point(|l| (l.index as i64) < i)
                    .min(self.levels.len() - 1);
                Source::Level(self.levels[slot].index)
            }
            _ => Source::Unsampled,
        };
        self.source = source;
        match source {
            Source::Unsampled => min_load_estimate(&self.base.collection),
            Source::Level(i) => self
                .levels
                .iter()
                .find(|l| l.index == i)
                .map_or(Estimate::Infinite, SamplerLevel::scaled_estimate),
        }
    }
}

impl Estimator for SampledCoveringEstimator {
    fn name(&self) -> &'static str {
        "cover-sampled"
    }

    fn apply(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Estimate, EstimatorError> {
        let mut updates = 0;
        match update {
            Update::Insert(..) => {
                if let Some(e) = self.loops.insert(m, update)? {
                    updates += self.base.insert(m, e)?.report.min_base_updates;
                    let seed = self.config.seed;
                    for level in &mut self.levels {
                        if coin(seed, level.index, e, level.p_num) {
                            updates += level.tracked.insert(m, e)?.report.min_base_updates;
                        }
                    }
                }
            }
            Update::Delete(e) => {
                if !self.loops.remove(*e) {
                    updates += self.base.delete(m, *e)?.report.min_base_updates;
                    for level in &mut self.levels {
                        if level.tracked.collection.contains(*e) {
                            updates += level.tracked.delete(m, *e)?.report.min_base_updates;
                        }
                    }
                }
                m.delete_element(*e)?;
            }
        }
        self.last_min_base_updates = updates;
        self.estimate = self.select();
        Ok(self.estimate)
    }

    fn estimate(&self) -> Estimate {
        self.estimate
    }
}
