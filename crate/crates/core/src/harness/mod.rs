//! Experiment drivers, rate fitting and structured reports.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod report;
pub mod suite;

pub use config::Config;
pub use experiments::RunConfig;
pub use fit::{fit_rate, log_times, RateFit};
pub use oracle::DenseOracle;
pub use report::{Check, Mode, Report, Rule, SeriesTable, Verdict};
