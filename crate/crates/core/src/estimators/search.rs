//! Elemental-subset search shared by the high-breakdown estimators.
//!
//! An elemental subset is `p*` observations; its fit interpolates them exactly.
//! Small problems enumerate every subset in lexicographic order, larger ones
//! draw distinct subsets from a seeded generator. Candidates keep their
//! generation order so ties are always broken by the earliest subset.

use std::collections::HashSet;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::solve_square;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSearchConfig {
    /// Random elemental starts when enumeration is too large.
    pub n_starts: usize,
    /// Best candidates refined to convergence.
    pub n_refine: usize,
    pub rng_seed: u64,
    /// Enumerate every subset when `C(n, p*)` is at most this.
    pub exhaustive_threshold: u64,
}

impl Default for SubsetSearchConfig {
    fn default() -> Self {
        Self {
            n_starts: 500,
            n_refine: 10,
            rng_seed: 0,
            exhaustive_threshold: 20_000,
        }
    }
}

impl SubsetSearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.n_refine == 0 || self.n_refine > self.n_starts {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_refine ({}) <= n_starts ({})",
                self.n_refine, self.n_starts
            )));
        }
        Ok(())
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Index sets of the elemental subsets to try.
pub fn elemental_subsets(n: usize, p: usize, cfg: &SubsetSearchConfig) -> Vec<Vec<usize>> {
    let total = n_choose_k(n, p);
    if total <= cfg.exhaustive_threshold as u128 {
        return (0..n).combinations(p).collect();
    }
    let want = (cfg.n_starts as u128).min(total) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut seen = HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    let mut attempts = 0usize;
    while out.len() < want && attempts < 100 * cfg.n_starts {
        attempts += 1;
        let mut idx = rand::seq::index::sample(&mut rng, n, p).into_vec();
        idx.sort_unstable();
        if seen.insert(idx.clone()) {
            out.push(idx);
        }
    }
    out
}

/// Exact fit through the given observations, `None` when they are degenerate.
pub fn elemental_fit(d: &Dataset, subset: &[usize]) -> Option<Vec<f64>> {
    let mut a: Vec<f64> = subset.iter().flat_map(|&i| d.design().row(i).iter().copied()).collect();
    let mut b: Vec<f64> = subset.iter().map(|&i| d.y()[i]).collect();
    if a.len() != b.len() * b.len() {
        return None;
    }
    solve_square(&mut a, &mut b)?;
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// All non-degenerate elemental fits, in generation order.
pub fn elemental_fits(d: &Dataset, cfg: &SubsetSearchConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let fits: Vec<Vec<f64>> = elemental_subsets(d.n(), d.n_coef(), cfg)
        .iter()
        .filter_map(|s| elemental_fit(d, s))
        .collect();
    if fits.is_empty() {
        return Err(Error::AllSubsetsDegenerate);
    }
    Ok(fits)
}

/// Keeps the `k` lowest scores; earlier insertions win ties.
#[derive(Debug)]
pub(crate) struct BestK<T> {
    k: usize,
    items: Vec<(f64, usize, T)>,
    counter: usize,
}

impl<T> BestK<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
            counter: 0,
        }
    }

    /// Score a new entry must beat to be kept.
    pub fn threshold(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items.last().map_or(f64::INFINITY, |e| e.0)
        }
    }

    pub fn push(&mut self, score: f64, item: T) {
        let order = self.counter;
        self.counter += 1;
        if !(score < self.threshold()) {
            return;
        }
        let pos = self
            .items
            .partition_point(|e| (e.0, e.1) <= (score, order));
        self.items.insert(pos, (score, order, item));
        self.items.truncate(self.k);
    }

    pub fn into_sorted(self) -> Vec<(f64, T)> {
        self.items.into_iter().map(|(s, _, t)| (s, t)).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(n_choose_k(12, 2), 66);
        assert_eq!(n_choose_k(100, 4), 3_921_225);
        assert_eq!(n_choose_k(3, 5), 0);
        assert_eq!(n_choose_k(9, 5), 126);
    }

    #[test]
    fn exhaustive_below_threshold() {
        let subsets = elemental_subsets(12, 2, &SubsetSearchConfig::default());
        assert_eq!(subsets.len(), 66);
        assert_eq!(subsets[0], vec![0, 1]);
    }

    #[test]
    fn random_subsets_are_distinct_and_seeded() {
        let cfg = SubsetSearchConfig {
            exhaustive_threshold: 0,
            ..SubsetSearchConfig::with_seed(42)
        };
        let a = elemental_subsets(30, 3, &cfg);
        let b = elemental_subsets(30, 3, &cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 500);
        // fewer subsets than starts: every subset is eventually drawn
        let small = elemental_subsets(12, 2, &cfg);
        assert_eq!(small.len(), 66);
    }

    #[test]
    fn best_k_ties_prefer_earlier() {
        let mut b = BestK::new(2);
        b.push(3.0, "a");
        b.push(1.0, "b");
        b.push(1.0, "c");
        b.push(0.5, "d");
        let v = b.into_sorted();
        assert_eq!(v, vec![(0.5, "d"), (1.0, "b")]);
    }
}
