//! Command-line harness for seeded SVGD and branched-SVGD sampling runs.

mod config;
mod presets;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use run::Failure;

#[derive(Parser)]
#[command(
    name = "bsvgd",
    version,
    about = "Seeded SVGD and branched-SVGD sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured run and write trace, snapshot, and metric artifacts.
    Run(run::RunArgs),
    /// Print the exact empirical 2-Wasserstein distance between two snapshot files.
    Wasserstein { file_a: PathBuf, file_b: PathBuf },
    /// Merge the metrics of completed runs into one comparison table.
    Report {
        /// Completed run directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write the merged table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the embedded preset configs.
    Presets {
        /// Preset name; prints every preset when omitted.
        name: Option<String>,
    },
}

/// BSVGD_THREADS caps the worker pool used for pairwise interaction sums
/// and metric replicates; results do not depend on it.
fn configure_threads() {
    if let Ok(value) = std::env::var("BSVGD_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring BSVGD_THREADS={value:?} (want a positive integer)"),
        }
    }
}

fn cmd_presets(name: Option<&str>) -> Result<(), Failure> {
    match name {
        Some(n) => {
            let text = presets::lookup(n).ok_or_else(|| {
                Failure::Usage(format!(
                    "unknown preset {n:?} (available: {})",
                    presets::NAMES.join(", ")
                ))
            })?;
            print!("{text}");
        }
        None => {
            for (i, n) in presets::NAMES.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# ---- {n} ----");
                print!("{}", presets::lookup(n).expect("listed preset"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Wasserstein { file_a, file_b } => report::cmd_wasserstein(file_a, file_b),
        Command::Report { runs, out } => report::cmd_report(runs, out.as_deref()),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
