//! Command-line front end: CSV ingestion, fitting, paths, tuning, the
//! M-estimator equivalence check and simulation benchmarks.

pub mod args;
pub mod bench;
pub mod commands;
pub mod data;
pub mod error;
pub mod output;

use args::{Cli, Command};
use error::Result;

/// Runs one command and writes its artifacts; returns the written paths.
pub fn run(cli: &Cli) -> Result<Vec<std::path::PathBuf>> {
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a)?.write_all(&a.out.out),
        Command::Path(a) => commands::cmd_path(a)?.write_all(&a.out.out),
        Command::Tune(a) => commands::cmd_tune(a)?.write_all(&a.out.out),
        Command::CheckTheorem1(a) => {
            let (art, failure) = commands::cmd_check_theorem1(a)?;
            let written = art.write_all(&a.out.out)?;
            match failure {
                Some(e) => Err(e),
                None => Ok(written),
            }
        }
        Command::Bench(a) => commands::cmd_bench(a)?.write_all(&a.out),
    }
}

/// Maps `PWLS_LOG` (quiet, info, debug) to a log level; warnings otherwise.
pub fn log_level(value: Option<&str>) -> log::LevelFilter {
    match value.map(str::trim) {
        Some("quiet") => log::LevelFilter::Off,
        Some("info") => log::LevelFilter::Info,
        Some("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    }
}
