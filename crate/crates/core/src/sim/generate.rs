//! Seeded data generation for the contamination experiments.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Generating model; the true coefficients are 0 for the intercept and 1 for
/// every slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// `Y = X + e`.
    One,
    /// `Y = X1 + X2 + X3 + e`.
    Two,
}

impl Example {
    pub fn covariates(self) -> usize {
        match self {
            Example::One => 1,
            Example::Two => 3,
        }
    }

    pub fn truth(self) -> Vec<f64> {
        let mut t = vec![1.0; self.covariates() + 1];
        t[0] = 0.0;
        t
    }
}

impl FromStr for Example {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(Example::One),
            "2" | "two" => Ok(Example::Two),
            _ => Err(Error::InvalidConfig(format!("unknown example {s:?}; expected 1 or 2"))),
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::One => "1",
            Example::Two => "2",
        })
    }
}

/// Error distribution and contamination pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCase {
    /// Standard normal.
    I,
    /// Student t with 3 degrees of freedom.
    II,
    /// Student t with 1 degree of freedom (Cauchy).
    III,
    /// `0.95 N(0, 1) + 0.05 N(0, 10^2)`.
    IV,
    /// Normal errors; the first 10% of responses set to 30.
    V,
    /// Normal errors; the first 10% of rows moved to x = 10, y = 50.
    VI,
}

impl ErrorCase {
    pub const ALL: [ErrorCase; 6] = [
        ErrorCase::I,
        ErrorCase::II,
        ErrorCase::III,
        ErrorCase::IV,
        ErrorCase::V,
        ErrorCase::VI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCase::I => "I",
            ErrorCase::II => "II",
            ErrorCase::III => "III",
            ErrorCase::IV => "IV",
            ErrorCase::V => "V",
            ErrorCase::VI => "VI",
        }
    }
}

impl FromStr for ErrorCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown case {s:?}; expected I..VI")))
    }
}

impl fmt::Display for ErrorCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub example: Example,
    pub error_case: ErrorCase,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(example: Example, error_case: ErrorCase, n: usize, replicates: usize, seed: u64) -> Result<Self> {
        let s = Self {
            example,
            error_case,
            n,
            replicates,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!("scenario needs n >= 10, got {}", self.n)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("scenario needs at least one replicate".into()));
        }
        Ok(())
    }

    /// Rows overwritten in cases V and VI.
    pub fn contaminated(&self) -> usize {
        match self.error_case {
            ErrorCase::V | ErrorCase::VI => self.n / 10,
            _ => 0,
        }
    }
}

/// Standard normal draws by the Box-Muller transform.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    /// Independent stream `stream` of base seed `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Student t with 3 degrees of freedom: `Z / sqrt(chi2_3 / 3)`.
    pub fn t3(&mut self) -> f64 {
        let z = self.normal();
        let chi2: f64 = (0..3).map(|_| self.normal().powi(2)).sum();
        z / (chi2 / 3.0).sqrt()
    }

    /// Student t with 1 degree of freedom as a ratio of normals.
    pub fn t1(&mut self) -> f64 {
        let z = self.normal();
        let w = self.normal();
        z / w
    }

    pub fn error(&mut self, case: ErrorCase) -> f64 {
        match case {
            ErrorCase::II => self.t3(),
            ErrorCase::III => self.t1(),
            ErrorCase::IV => {
                let wide = self.uniform() >= 0.95;
                let z = self.normal();
                if wide {
                    10.0 * z
                } else {
                    z
                }
            }
            ErrorCase::I | ErrorCase::V | ErrorCase::VI => self.normal(),
        }
    }
}

/// Dataset for replicate `replicate_index` of the scenario: covariates first,
/// then errors, then the contamination overwrite.
pub fn generate(s: &Scenario, replicate_index: u64) -> Dataset {
    let p = s.example.covariates();
    let mut g = NormalStream::new(s.seed, replicate_index);
    let x: Vec<f64> = (0..s.n * p).map(|_| g.normal()).collect();
    let mut y: Vec<f64> = (0..s.n)
        .map(|i| x[i * p..(i + 1) * p].iter().sum::<f64>() + g.error(s.error_case))
        .collect();
    let mut x = Matrix::from_row_major(s.n, p, x).expect("dimensions fixed above");
    let m = s.contaminated();
    for (i, yi) in y.iter_mut().enumerate().take(m) {
        match s.error_case {
            ErrorCase::V => *yi = 30.0,
            ErrorCase::VI => {
                // only the first covariate is moved; the others keep their draws
                x.row_mut(i)[0] = 10.0;
                *yi = 50.0;
            }
            _ => unreachable!("only cases V and VI contaminate"),
        }
    }
    Dataset::new(x, y, true).expect("generated data is finite and n >= 10")
}
