use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stexceed::cli::{cmd_exceed, cmd_fit, cmd_simstudy, error_record, AnalysisConfig, SimStudyConfig};
use stexceed::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stexceed",
    version,
    about = "Confidence regions for spatio-temporal exceedance sets"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate covariance parameters and write fit_report.json.
    Fit { config: PathBuf },
    /// Build exceedance regions and write mask CSVs, SVG maps and summary.json.
    Exceed { config: PathBuf },
    /// Run a coverage study and write coverage.csv.
    Simstudy { config: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit { config } => {
            let report = cmd_fit(&AnalysisConfig::load(&config)?)?;
            println!("fitted {} observations", report.n_obs);
        }
        Command::Exceed { config } => {
            let cfg = AnalysisConfig::load(&config)?;
            let summary = cmd_exceed(&cfg)?;
            for t in &summary.thresholds {
                println!(
                    "u = {}: {} confident, {} possible, {} none -> {}",
                    t.threshold,
                    t.counts.confident_exceed,
                    t.counts.possible_exceed,
                    t.counts.confident_not_exceed,
                    t.mask_file
                );
            }
        }
        Command::Simstudy { config } => {
            let results = cmd_simstudy(&SimStudyConfig::load(&config)?)?;
            for row in results.iter().flat_map(|r| &r.rows) {
                println!(
                    "{} phi={} rho={} nugget={} level={}: coverage {:.3} (se {:.3})",
                    row.pattern.name(),
                    row.phi,
                    row.rho,
                    row.nugget,
                    row.level,
                    row.coverage,
                    row.se
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
