use std::path::PathBuf;
use std::process::ExitCode;

use callias_cli::{run, RunOptions};
use clap::Parser;

/// Exit status: 0 success, 1 failed identity in a suite, 2 invalid
/// configuration, 3 numerical precondition failure, 4 i/o failure.
#[derive(Debug, Parser)]
#[command(name = "callias", version, about = "Index, spectral flow and eta computations from a TOML config")]
struct Args {
    /// Run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// Directory of the spectral cache; in-memory only when absent.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Run only these suite cases (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let opts = RunOptions {
        out: args.out,
        workers: args.workers,
        cache_dir: args.cache_dir,
        suite: args.suite,
    };
    ExitCode::from(run(&args.config, &opts) as u8)
}
