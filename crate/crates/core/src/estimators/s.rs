//! S-estimates: the coefficients minimizing a bisquare M-scale of the residuals.

use super::search::{elemental_fits, BestK, SubsetSearchConfig};
use super::zero_tolerance;
use crate::data::{raw_residuals, residuals_into, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::wls_raw;
use crate::rho_psi::{irls_weight, m_scale, MScaleSpec};

const REFINE_STEPS: usize = 100;
const REFINE_TOL: f64 = 1e-9;

/// Scale of a candidate: 0 when enough residuals vanish, `None` when the
/// M-scale cannot be computed.
fn candidate_scale(r: &[f64], spec: &MScaleSpec, tol: f64) -> Option<f64> {
    let n = r.len();
    let zeros = r.iter().filter(|v| v.abs() <= tol).count();
    if zeros as f64 >= n as f64 * (1.0 - spec.delta()) {
        return Some(0.0);
    }
    m_scale(r, spec).ok()
}

/// Refines a candidate by reweighting with bisquare weights at the current
/// M-scale; a step is kept only if it lowers the scale.
fn refine(d: &Dataset, spec: &MScaleSpec, start: Vec<f64>, scale: f64, tol: f64) -> (Vec<f64>, f64, usize, bool) {
    let psi = spec.psi();
    let mut beta = start;
    let mut sigma = scale;
    let mut r = raw_residuals(d, &beta);
    let mut w = vec![0.0; d.n()];
    for step in 1..=REFINE_STEPS {
        if sigma == 0.0 {
            return (beta, sigma, step - 1, true);
        }
        for (wi, ri) in w.iter_mut().zip(&r) {
            *wi = irls_weight(&psi, ri / sigma);
        }
        let Ok(next) = wls_raw(d.design(), d.y(), &w) else {
            return (beta, sigma, step, false);
        };
        let rn = raw_residuals(d, &next);
        let Some(sn) = candidate_scale(&rn, spec, tol) else {
            return (beta, sigma, step, false);
        };
        if sn > sigma {
            return (beta, sigma, step, true);
        }
        let done = (sn / sigma - 1.0).abs() < REFINE_TOL;
        beta = next;
        sigma = sn;
        r = rn;
        if done {
            return (beta, sigma, step, true);
        }
    }
    (beta, sigma, REFINE_STEPS, false)
}

/// Best candidate of the S search: coefficients and their minimized M-scale.
#[derive(Debug, Clone)]
pub(crate) struct SSolution {
    pub beta: Vec<f64>,
    pub scale: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn s_solve(d: &Dataset, spec: &MScaleSpec, cfg: &SubsetSearchConfig) -> Result<SSolution> {
    let fits = elemental_fits(d, cfg)?;
    let tol = zero_tolerance(d);
    let mut best = BestK::new(cfg.n_refine);
    let mut r = Vec::with_capacity(d.n());
    for beta in fits {
        residuals_into(d, &beta, &mut r);
        // A candidate whose mean rho at the current cutoff scale already
        // reaches delta cannot have a smaller scale.
        let cut = best.threshold();
        if cut.is_finite() && cut > 0.0 && spec.mean_rho(&r, cut) >= spec.delta() {
            continue;
        }
        if let Some(s) = candidate_scale(&r, spec, tol) {
            best.push(s, beta);
        }
    }
    if best.len() == 0 {
        return Err(Error::AllSubsetsDegenerate);
    }
    let mut winner: Option<SSolution> = None;
    for (scale, beta) in best.into_sorted() {
        let (beta, scale, iterations, converged) = refine(d, spec, beta, scale, tol);
        if winner.as_ref().is_none_or(|w| scale < w.scale) {
            winner = Some(SSolution {
                beta,
                scale,
                iterations,
                converged,
            });
        }
    }
    Ok(winner.expect("at least one candidate"))
}

pub fn fit_s(d: &Dataset, spec: &MScaleSpec, cfg: &SubsetSearchConfig) -> Result<RegressionFit> {
    let sol = s_solve(d, spec, cfg)?;
    let r = raw_residuals(d, &sol.beta);
    let weights = if sol.scale == 0.0 {
        let tol = zero_tolerance(d);
        r.iter().map(|v| if v.abs() <= tol { 1.0 } else { 0.0 }).collect()
    } else {
        let psi = spec.psi();
        r.iter().map(|v| irls_weight(&psi, v / sol.scale)).collect()
    };
    RegressionFit::assemble(d, MethodId::S, sol.beta, sol.scale, weights, sol.iterations, sol.converged)
}
