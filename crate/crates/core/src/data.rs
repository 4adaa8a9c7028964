//! Datasets, coefficient vectors, and the fit record every estimator returns.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Regression sample: raw covariates `x` (no intercept column) and response `y`.
///
/// When `has_intercept` is set the design used by every estimator is `x` with a
/// leading column of ones, so there are `p + 1` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    has_intercept: bool,
    design: Matrix,
    covariate_names: Vec<String>,
    response_name: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, has_intercept: bool) -> Result<Self> {
        let names = (1..=x.cols()).map(|j| format!("x{j}")).collect();
        Self::with_names(x, y, has_intercept, names, "y".to_string())
    }

    pub fn with_names(
        x: Matrix,
        y: Vec<f64>,
        has_intercept: bool,
        covariate_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        if covariate_names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                found: covariate_names.len(),
            });
        }
        for i in 0..x.rows() {
            if let Some(j) = x.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: covariate_names[j].clone(),
                });
            }
            if !y[i].is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: response_name,
                });
            }
        }
        let n_coef = x.cols() + usize::from(has_intercept);
        if y.len() < n_coef + 1 {
            return Err(Error::TooFewObservations {
                n: y.len(),
                required: n_coef + 1,
            });
        }
        let design = if has_intercept {
            let mut m = Matrix::zeros(x.rows(), n_coef);
            for i in 0..x.rows() {
                let row = m.row_mut(i);
                row[0] = 1.0;
                row[1..].copy_from_slice(x.row(i));
            }
            m
        } else {
            x.clone()
        };
        Ok(Self {
            x,
            y,
            has_intercept,
            design,
            covariate_names,
            response_name,
        })
    }

    /// Builds a dataset from per-observation covariate rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], y: Vec<f64>, has_intercept: bool) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, y, has_intercept)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of raw covariates.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// Number of fitted coefficients, `p + 1` with an intercept.
    pub fn n_coef(&self) -> usize {
        self.design.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// Design matrix with the intercept column applied.
    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    /// Coefficient labels in fit order (`intercept` first when present).
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_coef());
        if self.has_intercept {
            names.push("intercept".to_string());
        }
        names.extend(self.covariate_names.iter().cloned());
        names
    }

    /// Same covariates, different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        Self::with_names(
            self.x.clone(),
            y,
            self.has_intercept,
            self.covariate_names.clone(),
            self.response_name.clone(),
        )
    }

    /// Copy of the dataset with the given rows dropped.
    pub fn without_rows(&self, drop: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.n()).filter(|i| !drop.contains(i)).collect();
        let y = keep.iter().map(|&i| self.y[i]).collect();
        Self::with_names(
            self.x.select_rows(&keep),
            y,
            self.has_intercept,
            self.covariate_names.clone(),
            self.response_name.clone(),
        )
    }

    /// Reads a CSV with a header row. The response column becomes `y`; every
    /// other column, in header order, becomes a covariate. Columns in which no
    /// cell is numeric (row labels) are skipped.
    pub fn from_csv(path: impl AsRef<Path>, response_column: &str, intercept: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, response_column, intercept)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, response_column: &str, intercept: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let ycol = headers
            .iter()
            .position(|h| h == response_column)
            .ok_or_else(|| Error::MissingColumn {
                column: response_column.to_string(),
            })?;
        let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        let numeric = |j: usize| records.iter().any(|r| r.get(j).is_some_and(|c| c.parse::<f64>().is_ok()));
        let xcols: Vec<usize> = (0..headers.len())
            .filter(|&j| j != ycol && (records.is_empty() || numeric(j)))
            .collect();

        let mut rows = Vec::with_capacity(records.len());
        let mut y = Vec::with_capacity(records.len());
        for (r, record) in records.iter().enumerate() {
            let parse = |j: usize| -> Result<f64> {
                let cell = record.get(j).unwrap_or("");
                cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row: r + 1,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                })
            };
            y.push(parse(ycol)?);
            rows.push(xcols.iter().map(|&j| parse(j)).collect::<Result<Vec<_>>>()?);
        }
        let x = if rows.is_empty() {
            Matrix::zeros(0, xcols.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        let names = xcols.iter().map(|&j| headers[j].clone()).collect();
        Self::with_names(x, y, intercept, names, response_column.to_string())
    }
}

/// Fitted coefficient vector, intercept first when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        Ok(Self(beta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `y_i - x_i^T b` for every observation.
pub fn residuals(d: &Dataset, b: &Coefficients) -> Result<Vec<f64>> {
    if b.len() != d.n_coef() {
        return Err(Error::DimensionMismatch {
            expected: d.n_coef(),
            found: b.len(),
        });
    }
    Ok(raw_residuals(d, b.as_slice()))
}

pub(crate) fn raw_residuals(d: &Dataset, b: &[f64]) -> Vec<f64> {
    let x = d.design();
    d.y().iter().enumerate().map(|(i, y)| y - dot(x.row(i), b)).collect()
}

pub(crate) fn residuals_into(d: &Dataset, b: &[f64], out: &mut Vec<f64>) {
    let x = d.design();
    out.clear();
    out.extend(d.y().iter().enumerate().map(|(i, y)| y - dot(x.row(i), b)));
}

/// Estimators provided by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Ols,
    Lad,
    MHuber,
    MTukey,
    Lms,
    Lts,
    S,
    Lqd,
    Mm,
    GmMallows,
    GmSchweppe,
    S1s,
    RWilcoxon,
    Rewlse,
    MeanshiftSoft,
    MeanshiftHard,
}

impl MethodId {
    pub const ALL: [MethodId; 16] = [
        MethodId::Ols,
        MethodId::Lad,
        MethodId::MHuber,
        MethodId::MTukey,
        MethodId::Lms,
        MethodId::Lts,
        MethodId::S,
        MethodId::Lqd,
        MethodId::Mm,
        MethodId::GmMallows,
        MethodId::GmSchweppe,
        MethodId::S1s,
        MethodId::RWilcoxon,
        MethodId::Rewlse,
        MethodId::MeanshiftSoft,
        MethodId::MeanshiftHard,
    ];

    /// The eight columns of the simulation tables.
    pub const SIMULATION: [MethodId; 8] = [
        MethodId::Ols,
        MethodId::MHuber,
        MethodId::MTukey,
        MethodId::Lms,
        MethodId::Lts,
        MethodId::S,
        MethodId::Mm,
        MethodId::Rewlse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Ols => "ols",
            MethodId::Lad => "lad",
            MethodId::MHuber => "m_huber",
            MethodId::MTukey => "m_tukey",
            MethodId::Lms => "lms",
            MethodId::Lts => "lts",
            MethodId::S => "s",
            MethodId::Lqd => "lqd",
            MethodId::Mm => "mm",
            MethodId::GmMallows => "gm_mallows",
            MethodId::GmSchweppe => "gm_schweppe",
            MethodId::S1s => "s1s",
            MethodId::RWilcoxon => "r_wilcoxon",
            MethodId::Rewlse => "rewlse",
            MethodId::MeanshiftSoft => "meanshift_soft",
            MethodId::MeanshiftHard => "meanshift_hard",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|m| m.as_str()).collect()
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Result of fitting one estimator to one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: MethodId,
    pub coefficients: Coefficients,
    /// Residual scale in response units; 0 only for an exact fit.
    pub scale: f64,
    /// Final per-observation weights in `[0, 1]`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    /// Set when at least the estimator's coverage of observations is fitted exactly.
    pub exact_fit: bool,
}

impl RegressionFit {
    /// Assembles a fit, computing residuals from the coefficients.
    pub(crate) fn assemble(
        d: &Dataset,
        method: MethodId,
        beta: Vec<f64>,
        scale: f64,
        weights: Vec<f64>,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        debug_assert_eq!(weights.len(), d.n());
        debug_assert!(weights.iter().all(|w| (0.0..=1.0).contains(w)));
        let residuals = raw_residuals(d, &beta);
        Ok(Self {
            method,
            coefficients: Coefficients::new(beta)?,
            scale,
            weights,
            iterations,
            converged,
            residuals,
            exact_fit: scale == 0.0,
        })
    }

    pub fn beta(&self) -> &[f64] {
        self.coefficients.as_slice()
    }
}
