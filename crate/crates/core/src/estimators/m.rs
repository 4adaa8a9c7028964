//! OLS, LAD, and M-estimation by iteratively reweighted least squares.

use serde::{Deserialize, Serialize};

use super::{mad_or_exact, relative_change};
use crate::data::{raw_residuals, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, wls_raw};
use crate::rho_psi::{irls_weight, rho, PsiFamily, PsiSpec};

/// How the residual scale is obtained for an M-fit. The scale is held fixed
/// for the whole IRLS run either way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// MAD of the initial fit's residuals.
    InitialMad,
    /// A caller-supplied scale.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    pub psi: PsiSpec,
    pub max_iter: usize,
    /// Relative coefficient change at which iteration stops.
    pub tol: f64,
    pub scale_mode: ScaleMode,
}

impl IrlsConfig {
    pub fn new(psi: PsiSpec) -> Self {
        Self {
            psi,
            max_iter: 200,
            tol: 1e-8,
            scale_mode: ScaleMode::InitialMad,
        }
    }

    pub fn huber() -> Self {
        Self::new(PsiSpec::huber_default())
    }

    pub fn bisquare() -> Self {
        Self::new(PsiSpec::bisquare_default())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("IRLS needs tol > 0 and max_iter >= 1".into()));
        }
        if let ScaleMode::Fixed(s) = self.scale_mode {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed scale must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// How residuals are standardized inside `psi`.
#[derive(Debug, Clone, Copy)]
pub enum Standardization<'a> {
    /// `r_i / sigma`.
    Plain,
    /// Mallows: `w_i psi(r_i / sigma)` with leverage weights `w_i`.
    Mallows(&'a [f64]),
    /// Schweppe: `w_i psi(r_i / (w_i sigma))`.
    Schweppe(&'a [f64]),
}

impl Standardization<'_> {
    #[inline]
    fn weight(&self, psi: &PsiSpec, i: usize, r: f64, sigma: f64) -> f64 {
        match self {
            Standardization::Plain => irls_weight(psi, r / sigma),
            Standardization::Mallows(w) => w[i] * irls_weight(psi, r / sigma),
            Standardization::Schweppe(w) => irls_weight(psi, r / (w[i] * sigma)),
        }
    }

    /// The loss whose stationarity condition is the estimating equation.
    #[inline]
    fn loss(&self, psi: &PsiSpec, i: usize, r: f64, sigma: f64) -> f64 {
        match self {
            Standardization::Plain => rho(psi, r / sigma),
            Standardization::Mallows(w) => w[i] * rho(psi, r / sigma),
            Standardization::Schweppe(w) => w[i] * w[i] * rho(psi, r / (w[i] * sigma)),
        }
    }
}

/// Raw IRLS output, including the objective after every iterate.
#[derive(Debug, Clone)]
pub struct IrlsOutcome {
    pub beta: Vec<f64>,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after each update.
    pub objective_trace: Vec<f64>,
}

fn objective(d: &Dataset, psi: &PsiSpec, sigma: f64, std: Standardization, beta: &[f64]) -> f64 {
    raw_residuals(d, beta)
        .iter()
        .enumerate()
        .map(|(i, r)| std.loss(psi, i, *r, sigma))
        .sum()
}

/// IRLS at a fixed scale from `start`.
pub fn irls(
    d: &Dataset,
    psi: &PsiSpec,
    sigma: f64,
    start: &[f64],
    max_iter: usize,
    tol: f64,
    std: Standardization,
) -> Result<IrlsOutcome> {
    let mut beta = start.to_vec();
    let mut trace = vec![objective(d, psi, sigma, std, &beta)];
    let mut weights = vec![0.0; d.n()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let r = raw_residuals(d, &beta);
        for (i, w) in weights.iter_mut().enumerate() {
            *w = std.weight(psi, i, r[i], sigma);
        }
        let next = wls_raw(d.design(), d.y(), &weights)?;
        let change = relative_change(&beta, &next);
        beta = next;
        trace.push(objective(d, psi, sigma, std, &beta));
        if change < tol {
            converged = true;
            break;
        }
    }
    let r = raw_residuals(d, &beta);
    for (i, w) in weights.iter_mut().enumerate() {
        *w = std.weight(psi, i, r[i], sigma);
    }
    Ok(IrlsOutcome {
        beta,
        weights,
        iterations,
        converged,
        objective_trace: trace,
    })
}

pub(crate) fn ols_beta(d: &Dataset) -> Result<Vec<f64>> {
    lstsq(d.design(), d.y())
}

/// Ordinary least squares. The reported scale is the MAD of the residuals.
pub fn fit_ols(d: &Dataset) -> Result<RegressionFit> {
    let beta = ols_beta(d)?;
    let r = raw_residuals(d, &beta);
    let scale = mad_or_exact(d, &r).unwrap_or(0.0);
    RegressionFit::assemble(d, MethodId::Ols, beta, scale, vec![1.0; d.n()], 1, true)
}

const LAD_FLOOR: f64 = 1e-8;
const LAD_MAX_ITER: usize = 500;
const LAD_TOL: f64 = 1e-8;

fn l1(r: &[f64]) -> f64 {
    r.iter().map(|v| v.abs()).sum()
}

/// Least absolute deviations via IRLS with weights `1 / max(|r_i|, 1e-8)`,
/// followed by a vertex polish: the exact fit through the `p*` smallest
/// residuals replaces the iterate whenever it lowers the L1 objective.
pub fn fit_lad(d: &Dataset) -> Result<RegressionFit> {
    let mut beta = ols_beta(d)?;
    let mut r = raw_residuals(d, &beta);
    let mut obj = l1(&r);
    let mut w = vec![1.0; d.n()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < LAD_MAX_ITER {
        iterations += 1;
        for (wi, ri) in w.iter_mut().zip(&r) {
            *wi = 1.0 / ri.abs().max(LAD_FLOOR);
        }
        let next = wls_raw(d.design(), d.y(), &w)?;
        let rn = raw_residuals(d, &next);
        let on = l1(&rn);
        if on <= obj {
            let decrease = obj - on;
            beta = next;
            r = rn;
            obj = on;
            if decrease <= LAD_TOL * obj.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        } else {
            // IRLS overshot on a flat spot; keep the last iterate
            converged = true;
            break;
        }
    }

    for _ in 0..10 {
        let Some(vertex) = vertex_fit(d, &r) else { break };
        let rv = raw_residuals(d, &vertex);
        let ov = l1(&rv);
        if ov < obj {
            beta = vertex;
            r = rv;
            obj = ov;
        } else {
            break;
        }
    }

    let scale = mad_or_exact(d, &r).unwrap_or(0.0);
    let wmax = r.iter().map(|v| 1.0 / v.abs().max(LAD_FLOOR)).fold(0.0, f64::max);
    let weights = r.iter().map(|v| (1.0 / v.abs().max(LAD_FLOOR)) / wmax).collect();
    RegressionFit::assemble(d, MethodId::Lad, beta, scale, weights, iterations, converged)
}

/// Exact fit through the `p*` observations with the smallest absolute residuals.
fn vertex_fit(d: &Dataset, r: &[f64]) -> Option<Vec<f64>> {
    let p = d.n_coef();
    let mut order: Vec<usize> = (0..d.n()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    let idx = &order[..p];
    let a = d.design().select_rows(idx);
    let b: Vec<f64> = idx.iter().map(|&i| d.y()[i]).collect();
    lstsq(&a, &b).ok()
}

/// M-estimate. Huber starts from OLS, bisquare from LAD; the scale is fixed
/// for the whole run.
pub fn fit_m(d: &Dataset, cfg: &IrlsConfig) -> Result<RegressionFit> {
    cfg.validate()?;
    let method = match cfg.psi.family() {
        PsiFamily::Huber => MethodId::MHuber,
        PsiFamily::Bisquare => MethodId::MTukey,
    };
    let start = match cfg.psi.family() {
        PsiFamily::Huber => ols_beta(d)?,
        PsiFamily::Bisquare => fit_lad(d)?.coefficients.into_vec(),
    };
    let sigma = match cfg.scale_mode {
        ScaleMode::Fixed(s) => s,
        ScaleMode::InitialMad => match mad_or_exact(d, &raw_residuals(d, &start)) {
            Some(s) => s,
            None => {
                return RegressionFit::assemble(d, method, start, 0.0, vec![1.0; d.n()], 0, true);
            }
        },
    };
    let out = irls(d, &cfg.psi, sigma, &start, cfg.max_iter, cfg.tol, Standardization::Plain)?;
    RegressionFit::assemble(d, method, out.beta, sigma, out.weights, out.iterations, out.converged)
}
