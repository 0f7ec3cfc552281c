//! `(1 ± ε)` estimate of the fractional packing number `Φ`.
//!
//! The estimate is `1 / max ℓ(e)` over a greedy collection of
//! `k* = ⌈3·Φ_max·ln(n_max)/ε′²⌉` bases. In amortized mode the levels are
//! grouped into buckets of sizes 1, 2, 4, ... and only the buckets needed
//! for the current estimate follow updates; the rest catch up when the
//! estimate grows.

use crate::collection::{GreedyCollection, RecourseReport, Update};
use crate::estimator::{
    check_eps, collection_size, eps_prime, rank_of, Estimator, EstimatorError, Tracked,
};
use crate::matroid::{DynamicMatroid, RankOracle};
use crate::value::{rational_to_f64, Estimate, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PackingMode {
    WorstCase,
    Amortized,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackingConfig {
    pub eps: Rational,
    pub phi_max: u64,
    pub mode: PackingMode,
}

#[derive(Clone, Debug)]
pub struct PackingEstimator {
    eps: Rational,
    phi_max: u64,
    mode: PackingMode,
    k_star: usize,
    log_n: f64,
    tracked: Tracked,
    estimate: Estimate,
    last: RecourseReport,
    last_flush_queries: u64,
}

impl PackingEstimator {
    /// Starts from the elements already in `m`.
    pub fn new(m: &DynamicMatroid, config: PackingConfig) -> Result<Self, EstimatorError> {
        check_eps(config.eps)?;
        if config.phi_max == 0 {
            return Err(EstimatorError::InvalidConfig(
                "phi_max must be at least 1".into(),
            ));
        }
        let k_star = collection_size(config.eps, config.phi_max, m.n_max());
        let mut est = PackingEstimator {
            eps: config.eps,
            phi_max: config.phi_max,
            mode: config.mode,
            k_star,
            log_n: m.log_n(),
            tracked: Tracked::default(),
            estimate: Estimate::Infinite,
            last: RecourseReport::default(),
            last_flush_queries: 0,
        };
        let k0 = est.target_levels();
        let ground = m.ground_set();
        let rank = rank_of(m, &ground)?;
        est.tracked = Tracked::new(GreedyCollection::new(m, ground, k0)?, rank);
        est.estimate = est.current();
        Ok(est)
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn mode(&self) -> PackingMode {
        self.mode
    }

    pub fn eps(&self) -> Rational {
        self.eps
    }

    pub fn collection(&self) -> &GreedyCollection {
        &self.tracked.collection
    }

    pub fn last_recourse(&self) -> &RecourseReport {
        &self.last
    }

    /// Rank queries spent bringing lagging levels up to date during the last
    /// update.
    pub fn last_flush_queries(&self) -> u64 {
        self.last_flush_queries
    }

    /// Number of levels that should follow updates given the current
    /// estimate.
    fn target_levels(&self) -> usize {
        match self.mode {
            PackingMode::WorstCase => self.k_star,
            PackingMode::Amortized => {
                active_levels(self.k_star, self.phi_hat(), self.eps, self.log_n)
            }
        }
    }

    /// Previous estimate clamped to `[1, Φ_max]`; no estimate counts as
    /// `Φ_max`.
    fn phi_hat(&self) -> f64 {
        let cap = self.phi_max as f64;
        match self.estimate {
            Estimate::Infinite => cap,
            Estimate::Finite(r) => rational_to_f64(r).clamp(1.0, cap),
        }
    }

    fn current(&self) -> Estimate {
        let c = &self.tracked.collection;
        if self.tracked.rank() == 0 || c.synced() == 0 {
            return Estimate::Infinite;
        }
        match c.max_load() {
            Some((l, _)) => Estimate::ratio(c.synced() as u64, l),
            None => Estimate::Infinite,
        }
    }
}

/// Levels covered by the active buckets: bucket `j` holds levels
/// `2^j - 1 .. 2^{j+1} - 1` and is active iff `2^j < 4 · 3·Φ̂·ln n / ε′²`.
pub fn active_levels(k_star: usize, phi_hat: f64, eps: Rational, log_n: f64) -> usize {
    let ep = rational_to_f64(eps_prime(eps));
    let threshold = 4.0 * 3.0 * phi_hat * log_n / (ep * ep);
    let mut end = 0usize;
    let mut size = 1usize;
    while end < k_star && (size as f64) < threshold {
        end += size;
        size *= 2;
    }
    end.min(k_star)
}

/// Level ranges `(start, end)` of the buckets.
pub fn buckets(k_star: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut start, mut size) = (0usize, 1usize);
    while start < k_star {
        out.push((start, (start + size).min(k_star)));
        start += size;
        size *= 2;
    }
    out
}

impl Estimator for PackingEstimator {
    fn name(&self) -> &'static str {
        match self.mode {
            PackingMode::WorstCase => "pack-wc",
            PackingMode::Amortized => "pack-amortized",
        }
    }

    fn apply(
        &mut self,
        m: &mut DynamicMatroid,
        update: &Update,
    ) -> Result<Estimate, EstimatorError> {
        let target = self.target_levels();
        let collection = &mut self.tracked.collection;
        if collection.synced() > target {
            collection.unsync_tail(collection.synced() - target);
        }
        let applied = match update {
            Update::Insert(e, desc) => {
                m.insert_element(*e, desc.clone())?;
                self.tracked.insert(m, *e)?
            }
            Update::Delete(e) => {
                let applied = self.tracked.delete(m, *e)?;
                m.delete_element(*e)?;
                applied
            }
        };
        self.last = applied.report;
        self.last_flush_queries = 0;
        while self.tracked.collection.synced() < target {
            self.last_flush_queries += self.tracked.collection.sync_next_level(m)?;
        }
        self.estimate = self.current();
        Ok(self.estimate)
    }

    fn estimate(&self) -> Estimate {
        self.estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matroid::{ElementDescriptor, ElementId, MatroidFamily};
    use crate::oracle::packing_number;

    fn edge(e: u64) -> Update {
        Update::Insert(
            ElementId(e),
            ElementDescriptor::Edge {
                u: (e / 10) as u32,
                v: (e % 10) as u32,
            },
        )
    }

    fn config(mode: PackingMode, phi_max: u64) -> PackingConfig {
        PackingConfig {
            eps: Rational::new(1, 4),
            phi_max,
            mode,
        }
    }

    #[test]
    fn k4_stream_in_both_modes() {
        for mode in [PackingMode::WorstCase, PackingMode::Amortized] {
            let mut m = DynamicMatroid::new(MatroidFamily::Graphic, 6);
            let mut p = PackingEstimator::new(&m, config(mode, 2)).unwrap();
            assert_eq!(p.estimate(), Estimate::Infinite);
            for e in [12, 13, 14, 23, 24, 34] {
                let got = p.apply(&mut m, &edge(e)).unwrap();
                let truth = packing_number(&m).unwrap();
                assert!(
                    got.within(&truth, Rational::new(1, 4)),
                    "{mode:?} after {e}: {got} vs {truth}"
                );
            }
            assert!(p
                .estimate()
                .within(&Estimate::finite(2, 1), Rational::new(1, 4)));
        }
    }

    #[test]
    fn coloop_into_rank_zero() {
        let mut m = DynamicMatroid::new(MatroidFamily::Graphic, 6);
        let mut p = PackingEstimator::new(&m, config(PackingMode::WorstCase, 2)).unwrap();
        let got = p.apply(&mut m, &edge(12)).unwrap();
        assert_eq!(got, Estimate::finite(1, 1));
        assert_eq!(p.last_recourse().min_base_updates, p.k_star());
        assert_eq!(p.last_recourse().queries, 0);
    }

    #[test]
    fn delete_down_to_one_uniform_element() {
        let mut m = DynamicMatroid::new(MatroidFamily::Uniform { rank: 1 }, 4);
        let mut p = PackingEstimator::new(&m, config(PackingMode::Amortized, 3)).unwrap();
        for i in 0..3 {
            p.apply(
                &mut m,
                &Update::Insert(ElementId(i), ElementDescriptor::Plain),
            )
            .unwrap();
        }
        assert!(p
            .estimate()
            .within(&Estimate::finite(3, 1), Rational::new(1, 4)));
        p.apply(&mut m, &Update::Delete(ElementId(0))).unwrap();
        let got = p.apply(&mut m, &Update::Delete(ElementId(1))).unwrap();
        assert_eq!(got, Estimate::finite(1, 1));
        let got = p.apply(&mut m, &Update::Delete(ElementId(2))).unwrap();
        assert_eq!(got, Estimate::Infinite);
    }

    #[test]
    fn bucket_activity() {
        let eps = Rational::new(1, 4);
        // 3·Φ̂·ln n/ε′² with Φ̂ = 1, ln 12, ε′ = 1/5 is about 186; four times
        // that admits buckets up to size 512, i.e. levels 0..1023.
        assert_eq!(active_levels(560, 1.0, eps, 12f64.ln()), 560);
        assert_eq!(active_levels(5000, 1.0, eps, 12f64.ln()), 1023);
        assert_eq!(buckets(10), vec![(0, 1), (1, 3), (3, 7), (7, 10)]);
        assert_eq!(active_levels(10, 1.0, eps, 1.0), 10);
    }

    #[test]
    fn rejects_bad_config() {
        let m = DynamicMatroid::new(MatroidFamily::Graphic, 6);
        let bad = PackingConfig {
            eps: Rational::new(1, 2),
            phi_max: 2,
            mode: PackingMode::WorstCase,
        };
        assert!(PackingEstimator::new(&m, bad).is_err());
        assert!(PackingEstimator::new(&m, config(PackingMode::WorstCase, 0)).is_err());
    }
}
