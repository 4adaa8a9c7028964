//! Monte-Carlo experiments: data generation, MSE tables, and probes.

pub mod generate;
pub mod mse;
pub mod probe;

pub use generate::{generate, ErrorCase, Example, NormalStream, Scenario};
pub use mse::{coefficient_names, run_mse, run_mse_with, thread_pool, MseRow, MseTable};
pub use probe::{breakdown_probe, efficiency_probe, BreakdownReport, LADDER};
