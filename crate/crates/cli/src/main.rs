use std::process::ExitCode;

use clap::Parser;
use pwls_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = pwls_cli::log_level(std::env::var("PWLS_LOG").ok().as_deref());
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    match pwls_cli::run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::FAILURE
        }
    }
}
