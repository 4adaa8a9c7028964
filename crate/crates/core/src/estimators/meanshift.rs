//! Mean-shift outlier model `y = X beta + gamma + e` with a soft (L1) or hard
//! penalty on `gamma`, solved by alternating thresholding and least squares.

use serde::{Deserialize, Serialize};

use super::lts::{fit_lts, LtsConfig};
use super::m::fit_ols;
use super::search::SubsetSearchConfig;
use super::zero_tolerance;
use crate::data::{raw_residuals, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::Qr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// Multiple of the initial fit's scale.
    ScaleMultiple(f64),
    /// In response units.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub penalty: Penalty,
    pub lambda: Lambda,
    pub max_iter: usize,
    pub tol: f64,
    /// Start: `ols` or `lts`; `None` picks OLS for soft and LTS for hard.
    pub initial: Option<MethodId>,
    pub search: SubsetSearchConfig,
}

impl MeanShiftConfig {
    pub fn new(penalty: Penalty) -> Self {
        Self {
            penalty,
            lambda: Lambda::ScaleMultiple(2.5),
            max_iter: 100,
            tol: 1e-8,
            initial: None,
            search: SubsetSearchConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let l = match self.lambda {
            Lambda::ScaleMultiple(v) | Lambda::Absolute(v) => v,
        };
        if !(l > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("mean-shift needs tol > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }

    fn start_method(&self) -> MethodId {
        self.initial.unwrap_or(match self.penalty {
            Penalty::Soft => MethodId::Ols,
            Penalty::Hard => MethodId::Lts,
        })
    }
}

#[inline]
fn threshold(penalty: Penalty, r: f64, lambda: f64) -> f64 {
    match penalty {
        Penalty::Soft => r.signum() * (r.abs() - lambda).max(0.0),
        Penalty::Hard => {
            if r.abs() > lambda {
                r
            } else {
                0.0
            }
        }
    }
}

/// `1/2 ||y - X beta - gamma||^2` plus `lambda sum |gamma_i|` (soft) or
/// `lambda^2 / 2` per nonzero `gamma_i` (hard).
pub fn meanshift_objective(d: &Dataset, beta: &[f64], gamma: &[f64], lambda: f64, penalty: Penalty) -> f64 {
    let r = raw_residuals(d, beta);
    let fit: f64 = r.iter().zip(gamma).map(|(r, g)| 0.5 * (r - g).powi(2)).sum();
    let pen: f64 = match penalty {
        Penalty::Soft => lambda * gamma.iter().map(|g| g.abs()).sum::<f64>(),
        Penalty::Hard => 0.5 * lambda * lambda * gamma.iter().filter(|g| **g != 0.0).count() as f64,
    };
    fit + pen
}

#[derive(Debug, Clone)]
pub struct MeanShiftOutcome {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every sweep.
    pub objective_trace: Vec<f64>,
}

/// Alternates the `gamma` and `beta` updates from `start` at a given `lambda`.
pub fn meanshift_solve(
    d: &Dataset,
    start: &[f64],
    lambda: f64,
    penalty: Penalty,
    max_iter: usize,
    tol: f64,
) -> Result<MeanShiftOutcome> {
    let qr = Qr::new(d.design())?;
    let n = d.n();
    let size = d.y().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut beta = start.to_vec();
    let mut gamma = vec![0.0; n];
    let mut trace = Vec::new();
    let mut adjusted = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let r = raw_residuals(d, &beta);
        let mut dg = 0.0_f64;
        for i in 0..n {
            let g = threshold(penalty, r[i], lambda);
            dg = dg.max((g - gamma[i]).abs());
            gamma[i] = g;
            adjusted[i] = d.y()[i] - g;
        }
        let next = qr.solve(&adjusted);
        let db = beta.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        beta = next;
        let obj = meanshift_objective(d, &beta, &gamma, lambda, penalty);
        debug_assert!(
            trace.last().is_none_or(|&o: &f64| obj <= o + 1e-9 * o.abs().max(1.0)),
            "mean-shift objective increased"
        );
        trace.push(obj);
        if db + dg < tol * size {
            converged = true;
            break;
        }
    }
    Ok(MeanShiftOutcome {
        beta,
        gamma,
        lambda,
        iterations,
        converged,
        objective_trace: trace,
    })
}

pub fn fit_meanshift(d: &Dataset, cfg: &MeanShiftConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let method = match cfg.penalty {
        Penalty::Soft => MethodId::MeanshiftSoft,
        Penalty::Hard => MethodId::MeanshiftHard,
    };
    let init = match cfg.start_method() {
        MethodId::Ols => fit_ols(d)?,
        MethodId::Lts => fit_lts(
            d,
            &LtsConfig {
                q: None,
                search: cfg.search,
            },
        )?,
        other => {
            return Err(Error::InvalidConfig(format!(
                "mean-shift start must be ols or lts; got {other}"
            )))
        }
    };
    let lambda = match cfg.lambda {
        Lambda::Absolute(v) => v,
        Lambda::ScaleMultiple(k) => k * init.scale,
    };
    if lambda == 0.0 {
        // exact fit of the start: the zero-scale multiple leaves nothing to shrink
        let tol = zero_tolerance(d);
        let w = init.residuals.iter().map(|r| if r.abs() <= tol { 1.0 } else { 0.0 }).collect();
        return RegressionFit::assemble(d, method, init.coefficients.into_vec(), 0.0, w, 0, true);
    }
    let out = meanshift_solve(d, init.beta(), lambda, cfg.penalty, cfg.max_iter, cfg.tol)?;
    let r = raw_residuals(d, &out.beta);
    let weights: Vec<f64> = r
        .iter()
        .zip(&out.gamma)
        .map(|(r, g)| match cfg.penalty {
            Penalty::Hard => {
                if *g != 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Penalty::Soft => {
                if *r == 0.0 {
                    1.0
                } else {
                    (1.0 - g.abs() / r.abs()).clamp(0.0, 1.0)
                }
            }
        })
        .collect();
    // scale of the observations left unshifted
    let kept: Vec<f64> = r
        .iter()
        .zip(&out.gamma)
        .map(|(r, g)| r - g)
        .collect();
    let scale = super::mad_or_exact(d, &kept).unwrap_or(0.0);
    RegressionFit::assemble(d, method, out.beta, scale, weights, out.iterations, out.converged)
}
