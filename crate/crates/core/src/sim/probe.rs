//! Empirical breakdown and efficiency probes.

use serde::{Deserialize, Serialize};

use super::generate::{generate, ErrorCase, Example, Scenario};
use super::mse::run_mse;
use crate::data::{Dataset, MethodId};
use crate::error::{Error, Result};
use crate::estimators::{fit, FitOptions};
use crate::linalg::Matrix;

/// Magnitudes of the adversarial points.
pub const LADDER: [f64; 4] = [1e2, 1e4, 1e6, 1e8];
/// Growth of the coefficient error across the ladder that counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub m: usize,
    pub fraction: f64,
    /// `||beta(corrupted) - beta(clean)||` at each ladder magnitude; infinite when the fit failed.
    pub distances: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub method: MethodId,
    pub n: usize,
    pub seed: u64,
    pub steps: Vec<LadderStep>,
    /// Smallest diverging fraction; `None` when nothing up to n/2 diverged.
    pub delta_star: Option<f64>,
    /// Whether divergence, once reached, persisted at every larger fraction.
    pub monotone: bool,
}

impl BreakdownReport {
    /// `delta_star` as printed: a fraction, or `>0.5`.
    pub fn delta_star_label(&self) -> String {
        match self.delta_star {
            Some(d) => format!("{d}"),
            None => ">0.5".to_string(),
        }
    }
}

/// Replaces the first `m` rows by `x = magnitude` in every covariate and `y = magnitude^2`.
pub fn corrupt(d: &Dataset, m: usize, magnitude: f64) -> Result<Dataset> {
    let mut x = d.x().clone();
    let mut y = d.y().to_vec();
    for i in 0..m {
        x.row_mut(i).iter_mut().for_each(|v| *v = magnitude);
        y[i] = magnitude * magnitude;
    }
    Dataset::with_names(
        Matrix::from_row_major(x.rows(), x.cols(), x.as_slice().to_vec())?,
        y,
        d.has_intercept(),
        d.covariate_names().to_vec(),
        d.response_name().to_string(),
    )
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// A ladder diverges when the error grows monotonically and by more than
/// [`DIVERGENCE_RATIO`] from the first to the last magnitude.
pub fn ladder_diverges(distances: &[f64]) -> bool {
    let (first, last) = (distances[0], distances[distances.len() - 1]);
    if !last.is_finite() {
        return true;
    }
    let increasing = distances.windows(2).all(|w| w[1] > w[0]);
    increasing && last > DIVERGENCE_RATIO * first.max(f64::MIN_POSITIVE)
}

pub fn breakdown_probe(method: MethodId, n: usize, seed: u64, opts: &FitOptions) -> Result<BreakdownReport> {
    if n < 20 {
        return Err(Error::InvalidConfig(format!("breakdown probe needs n >= 20, got {n}")));
    }
    let s = Scenario::new(Example::One, ErrorCase::I, n, 1, seed)?;
    let clean = generate(&s, 0);
    let o = FitOptions { seed, ..*opts };
    let base = fit(&clean, method, &o)?.coefficients.into_vec();
    let mut steps = Vec::new();
    for m in 1..=n / 2 {
        let mut distances = Vec::with_capacity(LADDER.len());
        for &mag in &LADDER {
            let d = corrupt(&clean, m, mag)?;
            let dist = match fit(&d, method, &o) {
                Ok(f) => distance(f.beta(), &base),
                Err(_) => f64::INFINITY,
            };
            distances.push(dist);
        }
        steps.push(LadderStep {
            m,
            fraction: m as f64 / n as f64,
            diverged: ladder_diverges(&distances),
            distances,
        });
    }
    let first = steps.iter().position(|st| st.diverged);
    let monotone = first.is_none_or(|k| steps[k..].iter().all(|st| st.diverged));
    Ok(BreakdownReport {
        method,
        n,
        seed,
        delta_star: first.map(|k| steps[k].fraction),
        steps,
        monotone,
    })
}

/// Slope MSE of OLS divided by that of `method` on paired normal-error samples.
pub fn efficiency_probe(method: MethodId, n: usize, replicates: usize, seed: u64, opts: &FitOptions) -> Result<f64> {
    if replicates < 200 {
        return Err(Error::InvalidConfig(format!(
            "efficiency probe needs at least 200 replicates, got {replicates}"
        )));
    }
    let s = Scenario::new(Example::One, ErrorCase::I, n, replicates, seed)?;
    if method == MethodId::Ols {
        return Ok(1.0);
    }
    let t = run_mse(&s, &[MethodId::Ols, method], opts)?;
    let ols = t.get(MethodId::Ols, 1).expect("ols row");
    let other = t.get(method, 1).expect("method row");
    Ok(ols / other)
}
