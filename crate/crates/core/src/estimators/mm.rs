//! MM-estimates: S start, M-scale, then a bisquare M-step at a larger constant.

use serde::{Deserialize, Serialize};

use super::m::{irls, Standardization};
use super::s::s_solve;
use super::search::SubsetSearchConfig;
use crate::data::{raw_residuals, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::rho_psi::{irls_weight, m_scale, rho, MScaleSpec, PsiSpec, K0};

/// Bisquare constants for 0.80, 0.85, 0.90 and 0.95 normal efficiency.
pub const K1_TABLE: [(f64, f64); 4] = [(0.80, 3.14), (0.85, 3.44), (0.90, 3.88), (0.95, 4.68)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmConfig {
    pub k0: f64,
    pub k1: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub search: SubsetSearchConfig,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            k0: K0,
            k1: 4.68,
            max_iter: 200,
            tol: 1e-8,
            search: SubsetSearchConfig::default(),
        }
    }
}

impl MmConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            search: SubsetSearchConfig::with_seed(seed),
            ..Self::default()
        }
    }

    /// `k1` for a tabulated efficiency (0.80, 0.85, 0.90 or 0.95).
    pub fn k1_for_efficiency(eff: f64) -> Option<f64> {
        K1_TABLE.iter().find(|(e, _)| (e - eff).abs() < 1e-9).map(|(_, k)| *k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k0 > 0.0) || !(self.k1 >= self.k0) {
            return Err(Error::InvalidConfig(format!(
                "MM needs 0 < k0 <= k1, got k0 = {}, k1 = {}",
                self.k0, self.k1
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("MM needs tol > 0 and max_iter >= 1".into()));
        }
        Ok(())
    }
}

/// Stage objective `sum rho1(r_i / sigma)`.
pub fn mm_objective(d: &Dataset, beta: &[f64], sigma: f64, psi: &PsiSpec) -> f64 {
    raw_residuals(d, beta).iter().map(|r| rho(psi, r / sigma)).sum()
}

pub fn fit_mm(d: &Dataset, cfg: &MmConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let spec = MScaleSpec::new(cfg.k0, 0.5)?;
    let start = s_solve(d, &spec, &cfg.search)?;
    let beta0 = start.beta;
    let n = d.n();
    let sigma = if start.scale == 0.0 {
        0.0
    } else {
        m_scale(&raw_residuals(d, &beta0), &spec)?
    };
    if sigma == 0.0 {
        let tol = super::zero_tolerance(d);
        let weights = raw_residuals(d, &beta0)
            .iter()
            .map(|v| if v.abs() <= tol { 1.0 } else { 0.0 })
            .collect();
        return RegressionFit::assemble(d, MethodId::Mm, beta0, 0.0, weights, 0, true);
    }
    let psi1 = PsiSpec::bisquare(cfg.k1)?;
    let out = irls(d, &psi1, sigma, &beta0, cfg.max_iter, cfg.tol, Standardization::Plain)?;
    let l0 = mm_objective(d, &beta0, sigma, &psi1);
    let l1 = mm_objective(d, &out.beta, sigma, &psi1);
    let (beta, iterations, converged) = if l1 <= l0 {
        (out.beta, out.iterations, out.converged)
    } else {
        (beta0, out.iterations, false)
    };
    let weights = raw_residuals(d, &beta)
        .iter()
        .map(|r| irls_weight(&psi1, r / sigma))
        .collect::<Vec<_>>();
    debug_assert_eq!(weights.len(), n);
    RegressionFit::assemble(d, MethodId::Mm, beta, sigma, weights, iterations, converged)
}
