//! Synthetic experiments, rate fitting and the verification suite.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod rate;
pub mod synthetic;

pub use checks::{run_checks, write_checks_csv, CheckRow};
pub use config::{ExperimentConfig, LinkFamily};
pub use experiment::{read_csv, run_experiment, run_row, write_csv, ExperimentRow, CSV_COLUMNS};
pub use rate::{fit_rate, RateFit};
pub use synthetic::{generate_synthetic, generate_truth, SyntheticTruth, TrueLink};
