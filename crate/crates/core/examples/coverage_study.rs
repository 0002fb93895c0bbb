//! Empirical coverage of the above-threshold confidence region for one
//! cell of the synthetic study.
//!
//! cargo run --release --example coverage_study -- [phi] [rho] [nugget] [replicates] [known|estimated]

use std::time::Instant;

use stexceed::simstudy::{run_experiment, write_coverage_csv, ExperimentConfig, MeanPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, default: f64| args.get(i).map_or(Ok(default), |s| s.parse::<f64>());
    let mut config = ExperimentConfig::desk(MeanPattern::Trend, num(0, 0.5)?, num(1, 0.1)?, num(2, 0.0)?);
    config.n_replicates = num(3, 50.0)? as usize;
    config.covariance_known = args.get(4).is_none_or(|s| s != "estimated");

    let start = Instant::now();
    let result = run_experiment(&config)?;
    eprintln!(
        "{} replicates in {:.1} s, {} failed",
        config.n_replicates,
        start.elapsed().as_secs_f64(),
        result.failures.len()
    );
    write_coverage_csv(std::io::stdout(), &result.rows)?;
    Ok(())
}
