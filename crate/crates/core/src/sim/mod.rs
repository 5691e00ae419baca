//! Benchmark harness: configuration, Monte Carlo sweeps and the oracle
//! validation suite.

pub mod config;
pub mod harness;
pub mod validation;

pub use config::{noise_power, Scheme, SimConfig};
pub use harness::{run_kernel_training, run_sweep_q, run_sweep_snr, ResultRow, TrainingRow};
pub use validation::{run_validation, ValidationReport};
