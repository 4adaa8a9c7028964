//! Regression estimators.

pub mod gm;
pub mod lms;
pub mod lqd;
pub mod lts;
pub mod m;
pub mod meanshift;
pub mod mm;
pub mod rank;
pub mod rewlse;
pub mod s;
pub mod search;

use crate::data::Dataset;
use crate::rho_psi::mad_scale;

/// Residuals this small relative to `max |y|` count as an exact fit.
const EXACT_FIT_RTOL: f64 = 1e-9;

pub(crate) fn zero_tolerance(d: &Dataset) -> f64 {
    EXACT_FIT_RTOL * d.y().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// MAD of the residuals, or `None` when it is numerically zero (exact fit).
pub(crate) fn mad_or_exact(d: &Dataset, residuals: &[f64]) -> Option<f64> {
    match mad_scale(residuals) {
        Ok(s) if s > zero_tolerance(d) => Some(s),
        _ => None,
    }
}

/// Relative coefficient change used as the IRLS stopping rule.
pub(crate) fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let diff = old.iter().zip(new).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let size = new.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
    if size > 0.0 {
        diff / size
    } else {
        diff
    }
}

use serde::{Deserialize, Serialize};

use crate::data::{MethodId, RegressionFit};
use crate::error::Result;
use crate::rho_psi::{MScaleSpec, PsiSpec};

/// Options shared by the method dispatcher. Each estimator reads only the
/// fields that concern it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    /// Bisquare constant of the MM final stage.
    pub k1: f64,
    /// Mean-shift threshold as a multiple of the start's scale.
    pub lambda: f64,
    /// REWLSE cutoff on standardized residuals.
    pub eta: f64,
    pub rewlse_initial: MethodId,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            k1: 4.68,
            lambda: 2.5,
            eta: rewlse::DEFAULT_ETA,
            rewlse_initial: MethodId::S,
        }
    }
}

impl FitOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn search(&self) -> search::SubsetSearchConfig {
        search::SubsetSearchConfig::with_seed(self.seed)
    }
}

/// Fits `method` with its default configuration adjusted by `opts`.
pub fn fit(d: &Dataset, method: MethodId, opts: &FitOptions) -> Result<RegressionFit> {
    let search = opts.search();
    match method {
        MethodId::Ols => m::fit_ols(d),
        MethodId::Lad => m::fit_lad(d),
        MethodId::MHuber => m::fit_m(d, &m::IrlsConfig::huber()),
        MethodId::MTukey => m::fit_m(d, &m::IrlsConfig::bisquare()),
        MethodId::Lms => lms::fit_lms(d, &search),
        MethodId::Lts => lts::fit_lts(d, &lts::LtsConfig { q: None, search }),
        MethodId::S => s::fit_s(d, &MScaleSpec::default(), &search),
        MethodId::Lqd => lqd::fit_lqd(d, &lqd::LqdConfig::for_dataset(d, search)?),
        MethodId::Mm => mm::fit_mm(
            d,
            &mm::MmConfig {
                k1: opts.k1,
                search,
                ..mm::MmConfig::default()
            },
        ),
        MethodId::GmMallows => gm::fit_gm_mallows(d, &PsiSpec::huber_default()),
        MethodId::GmSchweppe => gm::fit_gm_schweppe(d, &PsiSpec::huber_default()),
        MethodId::S1s => gm::fit_s1s(d, &PsiSpec::bisquare_default(), &search),
        MethodId::RWilcoxon => rank::fit_r_wilcoxon(d),
        MethodId::Rewlse => rewlse::fit_rewlse(
            d,
            &rewlse::RewlseConfig {
                eta: opts.eta,
                initial: opts.rewlse_initial,
                search,
            },
        ),
        MethodId::MeanshiftSoft | MethodId::MeanshiftHard => {
            let penalty = if method == MethodId::MeanshiftSoft {
                meanshift::Penalty::Soft
            } else {
                meanshift::Penalty::Hard
            };
            meanshift::fit_meanshift(
                d,
                &meanshift::MeanShiftConfig {
                    lambda: meanshift::Lambda::ScaleMultiple(opts.lambda),
                    search,
                    ..meanshift::MeanShiftConfig::new(penalty)
                },
            )
        }
    }
}
