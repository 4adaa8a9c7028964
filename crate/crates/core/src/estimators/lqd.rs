//! Least quartile difference: minimize an order statistic of the pairwise
//! absolute residual differences.
//!
//! The objective ignores the intercept, which is set afterwards to the median
//! residual.

use serde::{Deserialize, Serialize};

use super::search::{elemental_fits, n_choose_k, BestK, SubsetSearchConfig};
use super::zero_tolerance;
use crate::data::{raw_residuals, residuals_into, Coefficients, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::{kth_smallest_in_place, median};
use crate::rho_psi::normal_quantile;

/// Largest `n` for which the pairwise differences are materialized.
pub const LQD_MAX_N: usize = 2000;
const PATTERN_SWEEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqdConfig {
    pub h_p: usize,
    pub k_pairs: usize,
    pub search: SubsetSearchConfig,
}

impl LqdConfig {
    /// Constants for a sample of `n` with `n_coef` coefficients.
    pub fn for_dims(n: usize, n_coef: usize, search: SubsetSearchConfig) -> Result<Self> {
        let h_p = (n + n_coef + 1) / 2;
        let cfg = Self {
            h_p,
            k_pairs: n_choose_k(h_p, 2) as usize,
            search,
        };
        cfg.validate(n)?;
        Ok(cfg)
    }

    pub fn for_dataset(d: &Dataset, search: SubsetSearchConfig) -> Result<Self> {
        Self::for_dims(d.n(), d.n_coef(), search)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n > LQD_MAX_N {
            return Err(Error::TooLarge { n, max: LQD_MAX_N });
        }
        let pairs = n_choose_k(n, 2) as usize;
        if self.k_pairs == 0 || self.k_pairs > pairs {
            return Err(Error::InvalidConfig(format!(
                "k_pairs = {} must lie in 1..={pairs}",
                self.k_pairs
            )));
        }
        Ok(())
    }
}

fn pairwise_kth(r: &[f64], k: usize, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            buf.push((r[i] - r[j]).abs());
        }
    }
    kth_smallest_in_place(buf, k).expect("k validated against the pair count")
}

pub fn lqd_objective(d: &Dataset, b: &Coefficients, cfg: &LqdConfig) -> Result<f64> {
    if d.n() < 2 {
        return Err(Error::TooFewObservations { n: d.n(), required: 2 });
    }
    cfg.validate(d.n())?;
    let r = crate::data::residuals(d, b)?;
    Ok(pairwise_kth(&r, cfg.k_pairs, &mut Vec::new()))
}

struct Objective<'a> {
    d: &'a Dataset,
    k: usize,
    r: Vec<f64>,
    buf: Vec<f64>,
}

impl Objective<'_> {
    fn eval(&mut self, beta: &[f64]) -> f64 {
        residuals_into(self.d, beta, &mut self.r);
        pairwise_kth(&self.r, self.k, &mut self.buf)
    }
}

/// Coordinatewise pattern search with step halving over the coordinates in
/// `free`. Returns the sweep count.
fn pattern_search(obj: &mut Objective, beta: &mut [f64], value: &mut f64, free: &[usize]) -> usize {
    let mut step: Vec<f64> = beta
        .iter()
        .map(|b| if *b == 0.0 { 0.1 } else { 0.1 * b.abs() })
        .collect();
    let mut sweeps = 0;
    while sweeps < PATTERN_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for &j in free {
            for dir in [1.0, -1.0] {
                let old = beta[j];
                beta[j] = old + dir * step[j];
                let v = obj.eval(beta);
                if v < *value {
                    *value = v;
                    improved = true;
                    break;
                }
                beta[j] = old;
            }
        }
        if !improved {
            let mut tiny = true;
            for &j in free {
                step[j] *= 0.5;
                tiny &= step[j] <= 1e-12 * (1.0 + beta[j].abs());
            }
            if tiny {
                break;
            }
        }
    }
    sweeps
}

/// Gaussian consistency divisor: the `k / C(n, 2)` quantile of `|Z1 - Z2|`.
pub fn lqd_consistency_constant(k_pairs: usize, n: usize) -> f64 {
    let frac = k_pairs as f64 / n_choose_k(n, 2) as f64;
    std::f64::consts::SQRT_2 * normal_quantile(0.5 * (1.0 + frac))
}

pub fn fit_lqd(d: &Dataset, cfg: &LqdConfig) -> Result<RegressionFit> {
    cfg.validate(d.n())?;
    let intercept = d.has_intercept();
    let free: Vec<usize> = (usize::from(intercept)..d.n_coef()).collect();
    let mut obj = Objective {
        d,
        k: cfg.k_pairs,
        r: Vec::with_capacity(d.n()),
        buf: Vec::with_capacity(d.n() * d.n() / 2),
    };
    let mut best = BestK::new(cfg.search.n_refine);
    for beta in elemental_fits(d, &cfg.search)? {
        let v = obj.eval(&beta);
        best.push(v, beta);
    }
    let mut winner: Option<(f64, Vec<f64>, usize)> = None;
    for (mut value, mut beta) in best.into_sorted() {
        let sweeps = if free.is_empty() {
            0
        } else {
            pattern_search(&mut obj, &mut beta, &mut value, &free)
        };
        if winner.as_ref().is_none_or(|w| value < w.0) {
            winner = Some((value, beta, sweeps));
        }
    }
    let (value, mut beta, sweeps) = winner.ok_or(Error::AllSubsetsDegenerate)?;
    if intercept {
        beta[0] = 0.0;
        beta[0] = median(&raw_residuals(d, &beta))?;
    }
    let scale = if value <= zero_tolerance(d) {
        0.0
    } else {
        value / lqd_consistency_constant(cfg.k_pairs, d.n())
    };
    let r = raw_residuals(d, &beta);
    let cut = if scale == 0.0 { zero_tolerance(d) } else { 2.5 * scale };
    let weights = r.iter().map(|v| if v.abs() <= cut { 1.0 } else { 0.0 }).collect();
    RegressionFit::assemble(d, MethodId::Lqd, beta, scale, weights, sweeps, true)
}
