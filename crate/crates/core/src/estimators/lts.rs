//! Least trimmed squares via elemental starts and concentration steps.

use serde::{Deserialize, Serialize};

use super::search::{elemental_fits, BestK, SubsetSearchConfig};
use super::zero_tolerance;
use crate::data::{raw_residuals, residuals_into, Coefficients, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, subset_normal_lstsq};
use crate::rho_psi::{normal_cdf, normal_quantile};

/// Concentration steps after each elemental start, before ranking starts.
const START_STEPS: usize = 2;
const MAX_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LtsConfig {
    /// Coverage; `None` means `floor(n / 2) + 1`.
    pub q: Option<usize>,
    pub search: SubsetSearchConfig,
}

impl LtsConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            q: None,
            search: SubsetSearchConfig::with_seed(seed),
        }
    }

    /// Coverage from a trimming proportion: `q = floor(n (1 - alpha) + 1)`.
    pub fn from_alpha(alpha: f64, n: usize, search: SubsetSearchConfig) -> Self {
        let q = (n as f64 * (1.0 - alpha) + 1.0).floor() as usize;
        Self { q: Some(q.min(n)), search }
    }

    pub fn coverage(&self, n: usize) -> usize {
        self.q.unwrap_or(n / 2 + 1)
    }

    /// Trimming proportion implied by the coverage, `1 - (q - 1) / n`.
    pub fn alpha(&self, n: usize) -> f64 {
        1.0 - (self.coverage(n) as f64 - 1.0) / n as f64
    }
}

/// Sum of the `q` smallest squared residuals.
pub fn lts_objective(d: &Dataset, b: &Coefficients, q: usize) -> Result<f64> {
    let r = crate::data::residuals(d, b)?;
    if q == 0 || q > d.n() {
        return Err(Error::IndexOutOfRange { k: q, len: d.n() });
    }
    let mut sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    Ok(trimmed_sum(&mut sq, q))
}

fn trimmed_sum(sq: &mut [f64], q: usize) -> f64 {
    if q < sq.len() {
        sq.select_nth_unstable_by(q - 1, f64::total_cmp);
    }
    sq[..q].iter().sum()
}

/// Indices of the `q` smallest absolute residuals, ties broken by index, sorted.
fn covered_set(r: &[f64], q: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    let key = |i: &usize| (r[*i].abs(), *i);
    if q < idx.len() {
        idx.select_nth_unstable_by(q - 1, |a, b| {
            let (ra, ia) = key(a);
            let (rb, ib) = key(b);
            ra.total_cmp(&rb).then(ia.cmp(&ib))
        });
    }
    idx.truncate(q);
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone)]
pub struct Concentration {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub steps: usize,
    /// Whether the covered set reached a fixed point.
    pub converged: bool,
    /// Objective at the start and after each step.
    pub trace: Vec<f64>,
}

/// Runs up to `max_steps` concentration steps from `start`: refit OLS on the
/// `q` observations with smallest residuals until the covered set is stable.
pub fn concentrate(d: &Dataset, start: &[f64], q: usize, max_steps: usize) -> Concentration {
    concentrate_with(d, start, q, max_steps, false)
}

/// `fast` refits through the normal equations; used only to rank starts.
fn concentrate_with(d: &Dataset, start: &[f64], q: usize, max_steps: usize, fast: bool) -> Concentration {
    let mut beta = start.to_vec();
    let mut r = raw_residuals(d, &beta);
    let mut sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    let mut objective = trimmed_sum(&mut sq, q);
    let mut trace = vec![objective];
    let mut covered = covered_set(&r, q);
    let mut steps = 0;
    let mut converged = false;
    let ymax = d.y().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let roundoff = 1e-20 * ymax * ymax * q as f64;
    while steps < max_steps {
        let next = if fast {
            subset_normal_lstsq(d.design(), d.y(), &covered)
        } else {
            let a = d.design().select_rows(&covered);
            let b: Vec<f64> = covered.iter().map(|&i| d.y()[i]).collect();
            lstsq(&a, &b).ok()
        };
        let Some(next) = next else { break };
        steps += 1;
        residuals_into(d, &next, &mut r);
        sq.clear();
        sq.extend(r.iter().map(|v| v * v));
        let obj = trimmed_sum(&mut sq, q);
        debug_assert!(
            fast || obj <= objective * (1.0 + 1e-10) + roundoff,
            "C-step increased objective"
        );
        if obj > objective {
            converged = true;
            break;
        }
        beta = next;
        objective = obj;
        trace.push(obj);
        let next_cover = covered_set(&r, q);
        if next_cover == covered {
            converged = true;
            break;
        }
        covered = next_cover;
    }
    Concentration {
        beta,
        objective,
        steps,
        converged,
        trace,
    }
}

/// Normal consistency factor for the LTS scale at coverage fraction `q / n`.
pub fn lts_consistency_factor(q: usize, n: usize) -> f64 {
    let alpha = q as f64 / n as f64;
    if alpha >= 1.0 {
        return 1.0;
    }
    let t = normal_quantile(0.5 * (1.0 + alpha));
    let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // E[Z^2 | |Z| <= t] for standard normal Z
    let trunc_var = 1.0 - 2.0 * t * phi / (2.0 * normal_cdf(t) - 1.0);
    1.0 / trunc_var.sqrt()
}

pub fn fit_lts(d: &Dataset, cfg: &LtsConfig) -> Result<RegressionFit> {
    let n = d.n();
    let q = cfg.coverage(n);
    if q <= d.n_coef() || q > n {
        return Err(Error::InvalidConfig(format!(
            "LTS coverage q = {q} must satisfy p* < q <= n (p* = {}, n = {n})",
            d.n_coef()
        )));
    }
    let fits = elemental_fits(d, &cfg.search)?;
    let mut best = BestK::new(cfg.search.n_refine);
    for beta in &fits {
        let c = concentrate_with(d, beta, q, START_STEPS, true);
        best.push(c.objective, c.beta);
    }
    let mut winner: Option<Concentration> = None;
    for (_, beta) in best.into_sorted() {
        let c = concentrate(d, &beta, q, MAX_STEPS);
        if winner.as_ref().is_none_or(|w| c.objective < w.objective) {
            winner = Some(c);
        }
    }
    let c = winner.ok_or(Error::AllSubsetsDegenerate)?;
    let raw = (c.objective / q as f64).sqrt();
    let scale = if raw <= zero_tolerance(d) {
        0.0
    } else {
        raw * lts_consistency_factor(q, n)
    };
    let r = raw_residuals(d, &c.beta);
    let covered = covered_set(&r, q);
    let mut weights = vec![0.0; n];
    covered.iter().for_each(|&i| weights[i] = 1.0);
    RegressionFit::assemble(d, MethodId::Lts, c.beta, scale, weights, c.steps, c.converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn consistency_factor_reference() {
        // q/n = 1/2: E[Z^2 | |Z| < 0.6745] = 0.1426..., factor 2.6477...
        let f = lts_consistency_factor(50, 100);
        assert!((f - 2.6477).abs() < 1e-3, "{f}");
        assert_eq!(lts_consistency_factor(10, 10), 1.0);
    }

    #[test]
    fn exact_line() {
        let x: Vec<[f64; 1]> = (0..9).map(|i| [i as f64]).collect();
        let y = x.iter().map(|r| 4.0 - r[0]).collect();
        let d = Dataset::from_rows(&x, y, true).unwrap();
        let fit = fit_lts(&d, &LtsConfig::default()).unwrap();
        assert!((fit.beta()[0] - 4.0).abs() < 1e-9 && (fit.beta()[1] + 1.0).abs() < 1e-9);
        assert!(fit.exact_fit);
    }

    #[test]
    fn c_steps_never_increase_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let x: Vec<[f64; 1]> = (0..30).map(|_| [rng.random_range(-2.0..2.0)]).collect();
            let y: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, r)| if i < 8 { 20.0 } else { r[0] + rng.random_range(-1.0..1.0) })
                .collect();
            let d = Dataset::from_rows(&x, y, true).unwrap();
            let start = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let c = concentrate(&d, &start, 16, 50);
            for w in c.trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn brute_force_coverage_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x: Vec<[f64; 1]> = (0..9).map(|_| [rng.random_range(-3.0..3.0)]).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| 0.5 * r[0] + rng.random_range(-2.0..2.0))
                .collect();
            let d = Dataset::from_rows(&x, y, true).unwrap();
            let cfg = LtsConfig {
                q: Some(5),
                ..LtsConfig::default()
            };
            let fit = fit_lts(&d, &cfg).unwrap();
            let got = lts_objective(&d, &fit.coefficients, 5).unwrap();
            let oracle = (0..9)
                .combinations(5)
                .filter_map(|s| {
                    let a = d.design().select_rows(&s);
                    let b: Vec<f64> = s.iter().map(|&i| d.y()[i]).collect();
                    let beta = lstsq(&a, &b).ok()?;
                    Some(
                        s.iter()
                            .map(|&i| (d.y()[i] - crate::linalg::dot(d.design().row(i), &beta)).powi(2))
                            .sum::<f64>(),
                    )
                })
                .fold(f64::INFINITY, f64::min);
            assert!((got - oracle).abs() <= 1e-9 * oracle.max(1.0), "{got} vs {oracle}");
        }
    }

    #[test]
    fn alpha_round_trip() {
        let cfg = LtsConfig::from_alpha(0.5, 20, SubsetSearchConfig::default());
        assert_eq!(cfg.coverage(20), 11);
        assert_eq!(LtsConfig::default().coverage(20), 11);
        assert!((LtsConfig::default().alpha(20) - 0.5).abs() < 1e-12);
    }
}
