//! End to end from files: write a CSV of observations and a config, then
//! run the same fit and exceedance steps as the `stexceed` binary.
//!
//! cargo run --release --example csv_workflow -- [output dir]

use std::fs;
use std::path::PathBuf;

use stexceed::cli::{cmd_exceed, AnalysisConfig};
use stexceed::linalg::RngStream;

const CONFIG: &str = r#"
[data]
path = "observations.csv"
x = "easting"
y = "northing"
time = "year"
value = "rain"
transform = "sqrt"

[model]
covariates = ["intercept", "coord1"]
target_time = 3.0

[model.covariance.spatial]
family = "exponential"
variance = 0.2
range = 0.4

[model.covariance.temporal]
family = "ar1"
rho = 0.5

[model.covariance.nugget.constant]
sigma_eps2 = 0.02

[grid]
kind = "convex_hull"
nx = 20
ny = 20

[exceedance]
thresholds = [1.5, 2.0]
alpha = 0.1
samples = 500
seed = 2013

[fit]
estimate = false            # keep the covariance above; the reml_fit example estimates it
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("stexceed-csv-workflow"));
    fs::create_dir_all(&dir)?;

    let mut rng = RngStream::new(6);
    let mut csv = String::from("station,easting,northing,year,rain\n");
    for s in 0..40 {
        let (x, y) = (rng.uniform(), rng.uniform());
        for year in 1..=3 {
            let root = 1.0 + 1.2 * x + 0.3 * rng.standard_normal();
            csv.push_str(&format!("st{s},{x},{y},{year},{}\n", root.max(0.0).powi(2)));
        }
    }
    fs::write(dir.join("observations.csv"), csv)?;

    let mut cfg = AnalysisConfig::from_toml(CONFIG, &dir)?;
    cfg.output.dir = dir.join("out");
    let summary = cmd_exceed(&cfg)?;
    println!("covariance: {:?}", summary.fit.params);
    for t in &summary.thresholds {
        println!(
            "u = {}: {:?} -> {}",
            t.threshold,
            t.counts,
            cfg.output.dir.join(&t.mask_file).display()
        );
    }
    Ok(())
}
