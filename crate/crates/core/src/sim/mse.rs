//! Mean-squared-error tables over seeded replicates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, Example, Scenario};
use crate::data::{Dataset, MethodId};
use crate::error::{Error, Result};
use crate::estimators::{fit, FitOptions};

/// Share of failed replicates above which a method fails the scenario.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub method: MethodId,
    pub coefficient: String,
    pub mse: f64,
    /// Replicates that contributed.
    pub replicates: usize,
    /// Replicates dropped after a failed or non-converged fit.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    pub scenario: Scenario,
    pub truth: Vec<f64>,
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn get(&self, method: MethodId, coefficient: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .nth(coefficient)
            .map(|r| r.mse)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "coefficient", "mse", "replicates", "excluded"])?;
        for r in &self.rows {
            out.write_record([
                r.method.as_str(),
                &r.coefficient,
                &r.mse.to_string(),
                &r.replicates.to_string(),
                &r.excluded.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<csv output>".into(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// `intercept, x1, ...` for the example's coefficients.
pub fn coefficient_names(example: Example) -> Vec<String> {
    let mut v = vec!["intercept".to_string()];
    v.extend((1..=example.covariates()).map(|j| format!("x{j}")));
    v
}

/// Thread pool honoring `ROBUSTREG_THREADS` (unset or 0 means one thread per core).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var("ROBUSTREG_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("ROBUSTREG_THREADS must be an integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))
}

/// Seed of the subset searches inside replicate `index`.
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every method on every replicate with a caller-supplied fitter, which
/// returns the coefficients and a convergence flag.
pub fn run_mse_with<F>(s: &Scenario, methods: &[MethodId], fitter: F) -> Result<MseTable>
where
    F: Fn(MethodId, &Dataset, u64) -> Result<(Vec<f64>, bool)> + Sync,
{
    s.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    let truth = s.example.truth();
    let slots: Vec<Vec<Option<Vec<f64>>>> = thread_pool()?.install(|| {
        (0..s.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let d = generate(s, rep);
                let seed = replicate_seed(s.seed, rep);
                methods
                    .iter()
                    .map(|&m| match fitter(m, &d, seed) {
                        Ok((beta, true)) if beta.iter().all(|v| v.is_finite()) => Some(beta),
                        _ => None,
                    })
                    .collect()
            })
            .collect()
    });

    let names = coefficient_names(s.example);
    let mut rows = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        let mut sums = vec![0.0; truth.len()];
        let mut used = 0;
        for rep in &slots {
            if let Some(beta) = &rep[k] {
                used += 1;
                for (j, (b, t)) in beta.iter().zip(&truth).enumerate() {
                    sums[j] += (b - t).powi(2);
                }
            }
        }
        let failed = s.replicates - used;
        if failed as f64 > MAX_FAILURE_RATE * s.replicates as f64 {
            return Err(Error::ScenarioFailure {
                method,
                failed,
                replicates: s.replicates,
            });
        }
        for (j, name) in names.iter().enumerate() {
            rows.push(MseRow {
                method,
                coefficient: name.clone(),
                mse: if used > 0 { sums[j] / used as f64 } else { f64::NAN },
                replicates: used,
                excluded: failed,
            });
        }
    }
    Ok(MseTable {
        scenario: *s,
        truth,
        rows,
    })
}

/// MSE table of the given methods with default settings.
pub fn run_mse(s: &Scenario, methods: &[MethodId], opts: &FitOptions) -> Result<MseTable> {
    run_mse_with(s, methods, |m, d, seed| {
        let o = FitOptions { seed, ..*opts };
        let f = fit(d, m, &o)?;
        Ok((f.coefficients.into_vec(), f.converged))
    })
}
