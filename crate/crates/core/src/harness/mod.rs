//! Experiment orchestration behind the command-line tool.

mod benchmark;
mod config;
mod example1;
mod io;
mod rate;

pub use benchmark::{run_student_t_benchmark, BenchmarkConfig, BenchmarkRow};
pub use config::{Config, SEED_ENV};
pub use example1::{run_example1, run_example1_with, truncated_divergence, truncated_w1, Example1Report, TRUNCATION_LEVELS};
pub use io::{ingest_csv, Table};
pub use rate::{fit_loglog, rate_preconditions, rate_study, RateMethod, RateRow, RateStudy, RateStudyConfig};
