//! Robust linear regression.
//!
//! Estimators take a [`Dataset`] and return a [`RegressionFit`]. The
//! [`fit`] dispatcher covers every [`MethodId`] with default settings; the
//! modules under [`estimators`] expose each method's full configuration.
//! [`sim`] runs the contamination experiments and breakdown/efficiency probes.

pub mod cli;
pub mod data;
pub mod demo;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod rho_psi;
pub mod sim;

pub use data::{residuals, Coefficients, Dataset, MethodId, RegressionFit};
pub use error::{Error, Result};
pub use estimators::{fit, FitOptions};
