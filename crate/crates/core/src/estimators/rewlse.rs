//! Robust and efficient weighted least squares with an adaptive cutoff.
//!
//! Residuals of a high-breakdown start are standardized by its scale. The
//! empirical tail of their absolute values is compared with the half-normal
//! cdf beyond `eta`; the excess decides how many of the largest residuals get
//! weight 0. The remaining observations are refit by least squares.

use serde::{Deserialize, Serialize};

use super::lms::fit_lms;
use super::lts::{fit_lts, LtsConfig};
use super::mm::{fit_mm, MmConfig};
use super::s::fit_s;
use super::search::SubsetSearchConfig;
use super::zero_tolerance;
use crate::data::{Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::wls_raw;
use crate::rho_psi::{half_normal_cdf, MScaleSpec};

pub const DEFAULT_ETA: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewlseState {
    pub eta: f64,
    /// Number of standardized absolute residuals below `eta`.
    pub i0: usize,
    pub d_n: f64,
    /// Number of observations given weight 0.
    pub eliminated: usize,
    /// Cutoff; residuals at or above it are eliminated. Infinite when none are.
    pub t_n: f64,
}

/// Adaptive cutoff for ascending standardized absolute residuals.
///
/// Exactly `floor(n d_n)` of the largest residuals are eliminated: with
/// `i_n = n - floor(n d_n)` the cutoff is `|r|_(i_n + 1)`, the smallest
/// eliminated value, and infinite when there is none. Since `n d_n < n - i0`
/// the cutoff is never below `eta`.
pub fn rewlse_threshold(sorted_abs: &[f64], eta: f64) -> Result<RewlseState> {
    if !(eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    if sorted_abs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Unsorted);
    }
    let n = sorted_abs.len();
    let i0 = sorted_abs.iter().take_while(|v| **v < eta).count();
    if i0 == n {
        return Ok(RewlseState {
            eta,
            i0,
            d_n: 0.0,
            eliminated: 0,
            t_n: f64::INFINITY,
        });
    }
    let nf = n as f64;
    // n d_n computed directly so that floor() sees integers exactly
    let mut n_d = 0.0_f64;
    for (k, v) in sorted_abs.iter().enumerate().skip(i0) {
        n_d = n_d.max(nf * half_normal_cdf(*v) - k as f64);
    }
    let floor = n_d.floor() as usize;
    if floor == 0 {
        return Ok(RewlseState {
            eta,
            i0,
            d_n: n_d / nf,
            eliminated: 0,
            t_n: f64::INFINITY,
        });
    }
    debug_assert!(floor <= n - i0);
    let i_n = n - floor;
    Ok(RewlseState {
        eta,
        i0,
        d_n: n_d / nf,
        eliminated: floor,
        t_n: sorted_abs[i_n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewlseConfig {
    pub eta: f64,
    pub initial: MethodId,
    pub search: SubsetSearchConfig,
}

impl Default for RewlseConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            initial: MethodId::S,
            search: SubsetSearchConfig::default(),
        }
    }
}

impl RewlseConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            search: SubsetSearchConfig::with_seed(seed),
            ..Self::default()
        }
    }
}

fn initial_fit(d: &Dataset, cfg: &RewlseConfig) -> Result<RegressionFit> {
    match cfg.initial {
        MethodId::S => fit_s(d, &MScaleSpec::default(), &cfg.search),
        MethodId::Lms => fit_lms(d, &cfg.search),
        MethodId::Lts => fit_lts(
            d,
            &LtsConfig {
                q: None,
                search: cfg.search,
            },
        ),
        MethodId::Mm => fit_mm(
            d,
            &MmConfig {
                search: cfg.search,
                ..MmConfig::default()
            },
        ),
        other => Err(Error::InvalidConfig(format!(
            "REWLSE start must be one of s, lms, lts, mm; got {other}"
        ))),
    }
}

/// Hard 0/1 weights from the initial fit's residuals and scale.
pub fn rewlse_weights(residuals: &[f64], scale: f64, eta: f64) -> Result<(Vec<f64>, RewlseState)> {
    let z: Vec<f64> = residuals.iter().map(|r| (r / scale).abs()).collect();
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    let state = rewlse_threshold(&sorted, eta)?;
    let w = z.iter().map(|v| if *v < state.t_n { 1.0 } else { 0.0 }).collect();
    Ok((w, state))
}

pub fn fit_rewlse(d: &Dataset, cfg: &RewlseConfig) -> Result<RegressionFit> {
    let init = initial_fit(d, cfg)?;
    let weights = if init.scale == 0.0 {
        let tol = zero_tolerance(d);
        init.residuals
            .iter()
            .map(|r| if r.abs() <= tol { 1.0 } else { 0.0 })
            .collect()
    } else {
        rewlse_weights(&init.residuals, init.scale, cfg.eta)?.0
    };
    let kept = weights.iter().filter(|w| **w > 0.0).count();
    if kept < d.n_coef() {
        return Err(Error::TooFewRetained {
            retained: kept,
            required: d.n_coef(),
        });
    }
    let beta = wls_raw(d.design(), d.y(), &weights)?;
    let r = crate::data::raw_residuals(d, &beta);
    let kept_r: Vec<f64> = r.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(r, _)| *r).collect();
    // least-squares scale of the retained observations
    let dof = kept.saturating_sub(d.n_coef()).max(1) as f64;
    let ss: f64 = kept_r.iter().map(|v| v * v).sum();
    let scale = if ss.sqrt() <= zero_tolerance(d) { 0.0 } else { (ss / dof).sqrt() };
    RegressionFit::assemble(d, MethodId::Rewlse, beta, scale, weights, 1, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::m::fit_ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the trimming rule with plain floating arithmetic.
    fn oracle(sorted: &[f64], eta: f64) -> (usize, f64) {
        let n = sorted.len();
        let i0 = sorted.iter().filter(|v| **v < eta).count();
        let mut dn = 0.0_f64;
        for i in (i0 + 1)..=n {
            let fplus = 2.0 * statrs::distribution::ContinuousCDF::cdf(
                &statrs::distribution::Normal::standard(),
                sorted[i - 1],
            ) - 1.0;
            dn = dn.max(fplus - (i as f64 - 1.0) / n as f64);
        }
        let cut = (n as f64 * dn).floor() as usize;
        (cut, dn)
    }

    #[test]
    fn nothing_beyond_eta() {
        let s = rewlse_threshold(&[0.1, 0.5, 2.0, 2.49], 2.5).unwrap();
        assert_eq!(s.d_n, 0.0);
        assert_eq!(s.t_n, f64::INFINITY);
        assert_eq!(s.i0, 4);
        assert_eq!(s.eliminated, 0);
    }

    #[test]
    fn single_far_residual() {
        let s = rewlse_threshold(&[0.1, 0.2, 0.3, 5.0], 2.5).unwrap();
        assert_eq!(s.i0, 3);
        assert!((s.d_n - 0.2499994).abs() < 1e-6, "{}", s.d_n);
        assert_eq!(s.t_n, f64::INFINITY);
        assert_eq!(s.eliminated, 0);
    }

    #[test]
    fn five_far_residuals() {
        let mut v: Vec<f64> = (0..15).map(|i| i as f64 * 0.1).collect();
        v.extend([10.0; 5]);
        let s = rewlse_threshold(&v, 2.5).unwrap();
        let (cut, dn) = oracle(&v, 2.5);
        assert_eq!(cut, 5);
        assert!((s.d_n - dn).abs() < 1e-12);
        assert_eq!(s.t_n, 10.0);
        assert_eq!(s.eliminated, 5);
    }

    #[test]
    fn random_instances_against_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut checked = 0;
        for _ in 0..200 {
            let n = rng.random_range(5..40);
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            for x in v.iter_mut().take(rng.random_range(0..n / 3 + 1)) {
                *x = rng.random_range(2.5..4.5);
            }
            v.sort_by(f64::total_cmp);
            let s = rewlse_threshold(&v, 2.5).unwrap();
            let (cut, dn) = oracle(&v, 2.5);
            assert!((s.d_n - dn).abs() < 1e-9);
            let nd = n as f64 * dn;
            if (nd - nd.round()).abs() < 1e-6 {
                // n d_n sits on an integer up to roundoff, either floor is valid
                continue;
            }
            if cut == 0 {
                assert_eq!(s.t_n, f64::INFINITY);
            } else {
                assert_eq!(s.eliminated, cut);
                assert_eq!(s.t_n, v[n - cut]);
                assert!(s.t_n >= 2.5);
            }
            checked += 1;
        }
        assert!(checked > 150, "{checked}");
    }

    #[test]
    fn unsorted_rejected() {
        assert!(matches!(rewlse_threshold(&[1.0, 0.5], 2.5), Err(Error::Unsorted)));
    }

    #[test]
    fn clean_data_equals_ols_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<[f64; 1]> = (0..30).map(|_| [rng.random_range(-2.0..2.0)]).collect();
        let y = x.iter().map(|r| r[0] + rng.random_range(-0.5..0.5)).collect();
        let d = Dataset::from_rows(&x, y, true).unwrap();
        let fit = fit_rewlse(&d, &RewlseConfig::default()).unwrap();
        assert!(fit.weights.iter().all(|w| *w == 1.0));
        assert_eq!(fit.beta(), fit_ols(&d).unwrap().beta());
    }
}
