use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use heom_dpt::cli::{parse_config, run};
use log::error;

/// Parameter sweeps of hierarchical-equations-of-motion generators.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid points processed concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let out = args
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("heom-dpt-out"));
    match run(&config, &out, args.workers) {
        Ok(summary) => {
            println!(
                "{} rows written to {} ({} points resumed)",
                summary.rows.len(),
                summary.results_path.display(),
                summary.resumed_points
            );
            if summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} analyses failed; see failures.csv", summary.failures.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            error!("{e}");
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
