//! Rank-based regression: Jaeckel's dispersion with Wilcoxon scores.

use super::m::fit_lad;
use super::mad_or_exact;
use crate::data::{raw_residuals, residuals_into, Dataset, MethodId, RegressionFit};
use crate::error::{Error, Result};
use crate::linalg::median;

const MAX_SWEEPS: usize = 10_000;
const STEP_TOL: f64 = 1e-8;

/// Wilcoxon scores `sqrt(12) (i / (n + 1) - 1/2)` for ranks `1..=n`.
pub fn wilcoxon_scores(n: usize) -> Vec<f64> {
    let s12 = 12f64.sqrt();
    (1..=n).map(|i| s12 * (i as f64 / (n as f64 + 1.0) - 0.5)).collect()
}

/// `sum a(R_i) r_i`; ties are ranked by index, which leaves the sum unchanged.
pub fn jaeckel_dispersion(r: &[f64], scores: &[f64]) -> f64 {
    let mut sorted = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().zip(scores).map(|(v, a)| v * a).sum()
}

struct Dispersion<'a> {
    d: &'a Dataset,
    scores: Vec<f64>,
    r: Vec<f64>,
}

impl Dispersion<'_> {
    fn eval(&mut self, beta: &[f64]) -> f64 {
        residuals_into(self.d, beta, &mut self.r);
        self.r.sort_by(f64::total_cmp);
        self.r.iter().zip(&self.scores).map(|(v, a)| v * a).sum()
    }
}

pub fn fit_r_wilcoxon(d: &Dataset) -> Result<RegressionFit> {
    let n = d.n();
    if n < 3 {
        return Err(Error::TooFewObservations { n, required: 3 });
    }
    let lad = fit_lad(d)?;
    let mut beta = lad.coefficients.into_vec();
    let free: Vec<usize> = (usize::from(d.has_intercept())..d.n_coef()).collect();
    let mut disp = Dispersion {
        d,
        scores: wilcoxon_scores(n),
        r: Vec::with_capacity(n),
    };
    let mut value = disp.eval(&beta);
    let mut step: Vec<f64> = beta.iter().map(|b| (0.1 * b.abs()).max(0.1)).collect();
    let mut sweeps = 0;
    let mut converged = free.is_empty();
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for &j in &free {
            // keep moving while the direction pays off
            for dir in [1.0, -1.0] {
                let mut moved = false;
                loop {
                    let old = beta[j];
                    beta[j] = old + dir * step[j];
                    let v = disp.eval(&beta);
                    if v < value {
                        value = v;
                        moved = true;
                    } else {
                        beta[j] = old;
                        break;
                    }
                }
                if moved {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            let mut done = true;
            for &j in &free {
                step[j] *= 0.5;
                done &= step[j] < STEP_TOL * (1.0 + beta[j].abs());
            }
            converged = done;
        }
    }
    if d.has_intercept() {
        beta[0] = 0.0;
        beta[0] = median(&raw_residuals(d, &beta))?;
    }
    let r = raw_residuals(d, &beta);
    let scale = mad_or_exact(d, &r).unwrap_or(0.0);
    RegressionFit::assemble(d, MethodId::RWilcoxon, beta, scale, vec![1.0; n], sweeps, converged)
}
