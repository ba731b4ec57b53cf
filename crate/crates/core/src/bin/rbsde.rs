use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rbsde::io::{run, Command, RunOptions, EXIT_USAGE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Oracle,
    Schedule,
    Diagnose,
    Mc,
    Validate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Solve => Command::Solve,
            Sub::Oracle => Command::Oracle,
            Sub::Schedule => Command::Schedule,
            Sub::Diagnose => Command::Diagnose,
            Sub::Mc => Command::Mc,
            Sub::Validate => Command::Validate,
        }
    }
}

/// Reflected BSDE solvers on a binomial lattice.
#[derive(Debug, Parser)]
#[command(name = "rbsde", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for sampled diagnostics and Monte Carlo.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = std::env::var("RBSDE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let options = RunOptions {
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    ExitCode::from(run(cli.command.into(), &cli.config, &options) as u8)
}
