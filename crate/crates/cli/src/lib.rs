//! Batch front end: reads scenario configuration files, runs bound
//! evaluation, simulation, or second-order analysis, and writes result rows.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{Config, Prepared};
pub use error::{CliError, Result};
pub use report::{Format, Row};
pub use run::{run, Mode};
