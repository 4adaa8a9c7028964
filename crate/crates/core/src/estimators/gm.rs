//! Generalized M-estimates with leverage weights `w_i = sqrt(1 - h_i)`:
//! Mallows, Schweppe, and the one-step S1S update.
//!
//! Schweppe standardization is known to be inconsistent when the errors are
//! asymmetric; no correction is attempted.

use super::lms::fit_lms;
use super::lts::{fit_lts, LtsConfig};
use super::m::{fit_lad, irls, Standardization};
use super::mad_or_exact;
use super::search::SubsetSearchConfig;
use crate::data::{raw_residuals, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::{hat_complements, Matrix, Qr};
use crate::rho_psi::{irls_weight, psi, psi_prime, PsiSpec};

const GM_MAX_ITER: usize = 500;
const GM_TOL: f64 = 1e-10;
/// `1 - h_i` at or below this is treated as an exactly leveraged row.
const LEVERAGE_EPS: f64 = 1e-24;

/// Mallows weights `sqrt(1 - h_i)`.
pub fn leverage_weights(d: &Dataset) -> Result<Vec<f64>> {
    let comp = hat_complements(d)?;
    comp.iter()
        .enumerate()
        .map(|(row, c)| {
            if *c <= LEVERAGE_EPS {
                Err(Error::ExactLeverage { row })
            } else {
                Ok(c.sqrt())
            }
        })
        .collect()
}

/// Sup-norm of the estimating equation `sum w_i psi(r_i / (v_i sigma)) x_i`,
/// with `v_i = 1` for Mallows and `v_i = w_i` for Schweppe.
pub fn gm_equation_residual(
    d: &Dataset,
    beta: &[f64],
    sigma: f64,
    psi_spec: &PsiSpec,
    w: &[f64],
    schweppe: bool,
) -> f64 {
    let r = raw_residuals(d, beta);
    let mut acc = vec![0.0; d.n_coef()];
    for (i, ri) in r.iter().enumerate() {
        let v = if schweppe { w[i] } else { 1.0 };
        let s = w[i] * psi(psi_spec, ri / (v * sigma));
        for (a, x) in acc.iter_mut().zip(d.design().row(i)) {
            *a += s * x;
        }
    }
    acc.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn fit_gm(d: &Dataset, psi_spec: &PsiSpec, schweppe: bool) -> Result<RegressionFit> {
    let method = if schweppe {
        MethodId::GmSchweppe
    } else {
        MethodId::GmMallows
    };
    let w = leverage_weights(d)?;
    let start = fit_lad(d)?.coefficients.into_vec();
    let Some(sigma) = mad_or_exact(d, &raw_residuals(d, &start)) else {
        return RegressionFit::assemble(d, method, start, 0.0, vec![1.0; d.n()], 0, true);
    };
    let std = if schweppe {
        Standardization::Schweppe(&w)
    } else {
        Standardization::Mallows(&w)
    };
    let out = irls(d, psi_spec, sigma, &start, GM_MAX_ITER, GM_TOL, std)?;
    RegressionFit::assemble(d, method, out.beta, sigma, out.weights, out.iterations, out.converged)
}

/// Mallows GM-estimate. The scale is the MAD of LAD residuals, held fixed.
pub fn fit_gm_mallows(d: &Dataset, psi_spec: &PsiSpec) -> Result<RegressionFit> {
    fit_gm(d, psi_spec, false)
}

/// Schweppe GM-estimate: residuals are standardized by `w_i sigma`.
pub fn fit_gm_schweppe(d: &Dataset, psi_spec: &PsiSpec) -> Result<RegressionFit> {
    fit_gm(d, psi_spec, true)
}

/// The S1S correction
/// `[sum psi'(r_i/(s w_i)) x_i x_i^T]^-1 sum s w_i psi(r_i/(s w_i)) x_i`,
/// or `None` when the matrix is singular.
pub fn s1s_step(d: &Dataset, beta0: &[f64], sigma: f64, w: &[f64], psi_spec: &PsiSpec) -> Option<Vec<f64>> {
    let p = d.n_coef();
    let r = raw_residuals(d, beta0);
    let mut m = Matrix::zeros(p, p);
    let mut g = vec![0.0; p];
    for (i, ri) in r.iter().enumerate() {
        let t = ri / (sigma * w[i]);
        let dp = psi_prime(psi_spec, t);
        let gi = sigma * w[i] * psi(psi_spec, t);
        let x = d.design().row(i);
        for a in 0..p {
            g[a] += gi * x[a];
            for b in 0..p {
                m.set(a, b, m.get(a, b) + dp * x[a] * x[b]);
            }
        }
    }
    let step = Qr::new(&m).ok()?.solve(&g);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// One-step GM-estimate from an LTS start with the LMS scale.
pub fn fit_s1s(d: &Dataset, psi_spec: &PsiSpec, search: &SubsetSearchConfig) -> Result<RegressionFit> {
    let w = leverage_weights(d)?;
    let beta0 = fit_lts(
        d,
        &LtsConfig {
            q: None,
            search: *search,
        },
    )?
    .coefficients
    .into_vec();
    let sigma = fit_lms(d, search)?.scale;
    if sigma == 0.0 {
        return RegressionFit::assemble(d, MethodId::S1s, beta0, 0.0, vec![1.0; d.n()], 0, true);
    }
    let (beta, converged) = match s1s_step(d, &beta0, sigma, &w, psi_spec) {
        Some(step) => (beta0.iter().zip(&step).map(|(b, s)| b + s).collect(), true),
        None => (beta0, false),
    };
    let weights = raw_residuals(d, &beta)
        .iter()
        .zip(&w)
        .map(|(r, wi)| irls_weight(psi_spec, r / (sigma * wi)))
        .collect();
    RegressionFit::assemble(d, MethodId::S1s, beta, sigma, weights, 1, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rho_psi::PsiFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Symmetric two-level design: every row has the same leverage.
    fn balanced(rng: &mut ChaCha8Rng) -> Dataset {
        let x: Vec<[f64; 1]> = (0..20).map(|i| [if i % 2 == 0 { -1.0 } else { 1.0 }]).collect();
        let y = x.iter().map(|r| 0.5 + 2.0 * r[0] + rng.random_range(-1.0..1.0)).collect();
        Dataset::from_rows(&x, y, true).unwrap()
    }

    #[test]
    fn constant_leverage_matches_plain_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let huber = PsiSpec::huber_default();
        for _ in 0..5 {
            let d = balanced(&mut rng);
            let w = leverage_weights(&d).unwrap();
            assert!(w.iter().all(|v| (v - w[0]).abs() < 1e-12));
            for schweppe in [false, true] {
                let fit = if schweppe {
                    fit_gm_schweppe(&d, &huber).unwrap()
                } else {
                    fit_gm_mallows(&d, &huber).unwrap()
                };
                // plain M at the same effective scale and start
                let start = fit_lad(&d).unwrap().coefficients.into_vec();
                let sigma = if schweppe { fit.scale * w[0] } else { fit.scale };
                let plain = irls(&d, &huber, sigma, &start, 500, 1e-12, Standardization::Plain).unwrap();
                for (a, b) in fit.beta().iter().zip(&plain.beta) {
                    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn estimating_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let huber = PsiSpec::huber_default();
        for _ in 0..10 {
            let x: Vec<[f64; 2]> = (0..30)
                .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let y: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, r)| if i < 3 { 12.0 } else { r[0] - r[1] + rng.random_range(-1.0..1.0) })
                .collect();
            let d = Dataset::from_rows(&x, y, true).unwrap();
            let w = leverage_weights(&d).unwrap();
            let m = fit_gm_mallows(&d, &huber).unwrap();
            assert!(gm_equation_residual(&d, m.beta(), m.scale, &huber, &w, false) < 1e-6);
            let s = fit_gm_schweppe(&d, &huber).unwrap();
            assert!(gm_equation_residual(&d, s.beta(), s.scale, &huber, &w, true) < 1e-6);
        }
    }

    #[test]
    fn exact_leverage_rejected() {
        // the only row with x = 1 is fitted exactly by its own slope
        let d = Dataset::from_rows(&[[0.0], [0.0], [0.0], [1.0]], vec![1.0, 2.0, 3.0, 4.0], true).unwrap();
        assert!(matches!(leverage_weights(&d), Err(Error::ExactLeverage { row: 3 })));
    }

    #[test]
    fn exact_line_all_variants() {
        let x: Vec<[f64; 1]> = (0..12).map(|i| [i as f64 - 3.0]).collect();
        let y = x.iter().map(|r| 1.0 + 3.0 * r[0]).collect();
        let d = Dataset::from_rows(&x, y, true).unwrap();
        let huber = PsiSpec::huber_default();
        for fit in [
            fit_gm_mallows(&d, &huber).unwrap(),
            fit_gm_schweppe(&d, &huber).unwrap(),
            fit_s1s(&d, &PsiSpec::bisquare_default(), &SubsetSearchConfig::default()).unwrap(),
        ] {
            assert!((fit.beta()[0] - 1.0).abs() < 1e-9 && (fit.beta()[1] - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn s1s_step_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<[f64; 1]> = (0..15).map(|_| [rng.random_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + r[0] + rng.random_range(-1.0..1.0)).collect();
        let d = Dataset::from_rows(&x, y.clone(), true).unwrap();
        let w = leverage_weights(&d).unwrap();
        let spec = PsiSpec::new(PsiFamily::Bisquare, 4.685).unwrap();
        let beta0 = [0.8, 1.1];
        let sigma = 0.7;
        // explicit 2x2 sums and Cramer's rule
        let (mut a, mut b, mut c, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..15 {
            let xi = x[i][0];
            let r = y[i] - beta0[0] - beta0[1] * xi;
            let t = r / (sigma * w[i]);
            let u = t / 4.685;
            let (ps, pp) = if u.abs() < 1.0 {
                (t * (1.0 - u * u).powi(2), (1.0 - u * u) * (1.0 - 5.0 * u * u))
            } else {
                (0.0, 0.0)
            };
            a += pp;
            b += pp * xi;
            c += pp * xi * xi;
            g0 += sigma * w[i] * ps;
            g1 += sigma * w[i] * ps * xi;
        }
        let det = a * c - b * b;
        let oracle = [(c * g0 - b * g1) / det, (a * g1 - b * g0) / det];
        let step = s1s_step(&d, &beta0, sigma, &w, &spec).unwrap();
        for (s, o) in step.iter().zip(oracle) {
            assert!((s - o).abs() < 1e-10, "{s} vs {o}");
        }
    }
}
