//! Simulation designs, replication engine and rate certification.

pub mod config;
pub mod dgp;
pub mod experiment;
pub mod rate;
pub mod rng;

pub use config::{DgpConfig, ExperimentConfig};
pub use dgp::{generate_sample, DesignLaw, DgpSpec, ErrorLaw, RegressionFn};
pub use experiment::{run_rate_experiment, CheckKind, RateReport, Scale, Target};
pub use rate::{fit_rate, RateFit};
