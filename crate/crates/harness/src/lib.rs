//! Monte Carlo harness for the `msgamp` estimators: experiment files,
//! seeded sweeps, result files and the denoiser quadrature check.

pub mod config;
pub mod error;
pub mod experiment;
pub mod oracle;

pub use config::{ExperimentSpec, Overrides};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, write_results, ResultTable};
