//! Loss (`rho`), influence (`psi`) and IRLS weight functions, plus the MAD and
//! M-scale estimators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::median_in_place;

/// Huber's recommended tuning constant.
pub const HUBER_C: f64 = 1.345;
/// Bisquare tuning constant for 95% efficiency.
pub const BISQUARE_C: f64 = 4.685;
/// Bisquare constant of the high-breakdown M-scale.
pub const K0: f64 = 1.56;
/// Normal consistency denominator of the MAD.
pub const MAD_CONSTANT: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiFamily {
    Huber,
    Bisquare,
}

/// A `rho`/`psi` family with its tuning constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    family: PsiFamily,
    c: f64,
}

impl PsiSpec {
    pub fn new(family: PsiFamily, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("tuning constant must be positive, got {c}")));
        }
        Ok(Self { family, c })
    }

    pub fn huber(c: f64) -> Result<Self> {
        Self::new(PsiFamily::Huber, c)
    }

    pub fn bisquare(c: f64) -> Result<Self> {
        Self::new(PsiFamily::Bisquare, c)
    }

    pub fn huber_default() -> Self {
        Self { family: PsiFamily::Huber, c: HUBER_C }
    }

    pub fn bisquare_default() -> Self {
        Self { family: PsiFamily::Bisquare, c: BISQUARE_C }
    }

    pub fn family(&self) -> PsiFamily {
        self.family
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sup rho`, infinite for Huber.
    pub fn rho_max(&self) -> f64 {
        match self.family {
            PsiFamily::Huber => f64::INFINITY,
            PsiFamily::Bisquare => self.c * self.c / 6.0,
        }
    }
}

pub fn rho(spec: &PsiSpec, t: f64) -> f64 {
    let c = spec.c;
    let a = t.abs();
    match spec.family {
        PsiFamily::Huber => {
            if a <= c {
                0.5 * t * t
            } else {
                c * a - 0.5 * c * c
            }
        }
        PsiFamily::Bisquare => {
            if a <= c {
                let u = 1.0 - (t / c).powi(2);
                c * c / 6.0 * (1.0 - u * u * u)
            } else {
                c * c / 6.0
            }
        }
    }
}

pub fn psi(spec: &PsiSpec, t: f64) -> f64 {
    let c = spec.c;
    match spec.family {
        PsiFamily::Huber => t.clamp(-c, c),
        PsiFamily::Bisquare => {
            if t.abs() < c {
                let u = 1.0 - (t / c).powi(2);
                t * u * u
            } else {
                0.0
            }
        }
    }
}

/// Derivative of `psi`. Huber's kink at `|t| = c` takes the value 0.
pub fn psi_prime(spec: &PsiSpec, t: f64) -> f64 {
    let c = spec.c;
    match spec.family {
        PsiFamily::Huber => {
            if t.abs() < c {
                1.0
            } else {
                0.0
            }
        }
        PsiFamily::Bisquare => {
            if t.abs() <= c {
                let u2 = (t / c).powi(2);
                (1.0 - u2) * (1.0 - 5.0 * u2)
            } else {
                0.0
            }
        }
    }
}

/// `psi(t) / t`, with its limit 1 at zero.
pub fn irls_weight(spec: &PsiSpec, t: f64) -> f64 {
    let c = spec.c;
    match spec.family {
        PsiFamily::Huber => {
            let a = t.abs();
            if a <= c {
                1.0
            } else {
                c / a
            }
        }
        PsiFamily::Bisquare => {
            if t.abs() < c {
                let u = 1.0 - (t / c).powi(2);
                u * u
            } else {
                0.0
            }
        }
    }
}

/// Normalized median absolute deviation about the median.
pub fn mad_scale(residuals: &[f64]) -> Result<f64> {
    let mut buf = residuals.to_vec();
    let med = median_in_place(&mut buf)?;
    buf.iter_mut().zip(residuals).for_each(|(b, r)| *b = (r - med).abs());
    let mad = median_in_place(&mut buf)?;
    if mad > 0.0 {
        Ok(mad / MAD_CONSTANT)
    } else {
        Err(Error::DegenerateScale)
    }
}

/// Bisquare M-scale with `rho` normalized to `sup rho = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MScaleSpec {
    k0: f64,
    delta: f64,
}

impl MScaleSpec {
    pub fn new(k0: f64, delta: f64) -> Result<Self> {
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::InvalidConfig(format!("k0 must be positive, got {k0}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { k0, delta })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn psi(&self) -> PsiSpec {
        PsiSpec {
            family: PsiFamily::Bisquare,
            c: self.k0,
        }
    }

    /// Bisquare `rho` scaled to `[0, 1]`.
    #[inline]
    pub fn rho_normalized(&self, t: f64) -> f64 {
        let u2 = (t / self.k0).powi(2);
        if u2 >= 1.0 {
            1.0
        } else {
            let u = 1.0 - u2;
            1.0 - u * u * u
        }
    }

    /// `(1/n) sum rho(r_i / sigma)` in normalized units.
    pub fn mean_rho(&self, residuals: &[f64], sigma: f64) -> f64 {
        let inv = 1.0 / sigma;
        residuals.iter().map(|r| self.rho_normalized(r * inv)).sum::<f64>() / residuals.len() as f64
    }
}

impl Default for MScaleSpec {
    fn default() -> Self {
        Self { k0: K0, delta: 0.5 }
    }
}

pub const M_SCALE_MAX_ITER: usize = 200;
const M_SCALE_TOL: f64 = 1e-10;

/// Solves `(1/n) sum rho(r_i / sigma) = delta` by the fixed-point iteration
/// `sigma^2 <- sigma^2 * mean(rho(r / sigma)) / delta`, started at the MAD.
pub fn m_scale(residuals: &[f64], spec: &MScaleSpec) -> Result<f64> {
    let n = residuals.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let zeros = residuals.iter().filter(|r| **r == 0.0).count();
    if zeros as f64 >= n as f64 * (1.0 - spec.delta) {
        return Err(Error::TooManyZeroResiduals { zeros, n });
    }
    let mut sigma = match mad_scale(residuals) {
        Ok(s) => s,
        // MAD collapses when half the residuals coincide; any positive start works.
        Err(_) => residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
    };
    for _ in 0..M_SCALE_MAX_ITER {
        let next = sigma * (spec.mean_rho(residuals, sigma) / spec.delta).sqrt();
        if !(next > 0.0 && next.is_finite()) {
            return Err(Error::DegenerateScale);
        }
        let done = (next / sigma - 1.0).abs() < M_SCALE_TOL;
        sigma = next;
        if done {
            return Ok(sigma);
        }
    }
    Err(Error::NoConvergence {
        what: "M-scale",
        iterations: M_SCALE_MAX_ITER,
    })
}

/// Standard normal cdf.
pub(crate) fn normal_cdf(t: f64) -> f64 {
    Normal::standard().cdf(t)
}

/// Standard normal quantile.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// cdf of `|Z|` for standard normal `Z`: `2 Phi(t) - 1`.
pub(crate) fn half_normal_cdf(t: f64) -> f64 {
    if t.is_infinite() {
        return 1.0;
    }
    statrs::function::erf::erf(t / std::f64::consts::SQRT_2)
}
