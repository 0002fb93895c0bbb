//! Conditional simulation: draw an ensemble, check its moments against
//! the kriging predictor and round-trip it through the binary format.
//!
//! cargo run --release --example conditional_ensemble

use std::sync::Arc;

use stexceed::condsim::{ConditionalEnsemble, ConditionalSimulator};
use stexceed::covariance::{CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind};
use stexceed::grid::{make_grid, Rect};
use stexceed::kriging::{CovariateBuilder, Dataset, FittedModel, Observation};
use stexceed::linalg::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = RngStream::new(8);
    let obs: Vec<Observation> = (0..15)
        .map(|_| Observation {
            site: SpaceTimePoint::new(rng.uniform(), rng.uniform(), 1.0).into(),
            value: 2.0 + rng.standard_normal(),
        })
        .collect();
    let dataset = Arc::new(Dataset::new(obs, CovariateBuilder::intercept(), 1.0)?);
    let params = CovarianceParams::new(
        SpatialCovKind::Matern {
            variance: 1.0,
            range: 0.25,
            smoothness: 1.5,
        },
        TemporalCovKind::Ar1 { rho: 0.5 },
        NuggetSpec::zero(),
    )?;
    let model = FittedModel::new(dataset, params)?;
    let grid = make_grid(Rect::unit(), 10, 10)?;
    let sim = ConditionalSimulator::for_grid(&model, &grid)?;

    let b = 2000;
    let ensemble = sim.ensemble(b, 42)?;
    let mut worst = 0.0f64;
    for j in 0..grid.len() {
        let mean = ensemble.realizations().map(|z| z[j]).sum::<f64>() / b as f64;
        let var = ensemble.realizations().map(|z| (z[j] - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        let sd = sim.krig_sd()[j];
        if sd > 0.0 {
            worst = worst.max((var / (sd * sd) - 1.0).abs());
        }
    }
    println!(
        "{b} realizations over {} pixels; max |var / krig_var - 1| = {worst:.3}",
        grid.len()
    );

    let path = std::env::temp_dir().join("stexceed-example-ensemble.bin");
    ensemble.write_binary(&path)?;
    let back = ConditionalEnsemble::read_binary(&path)?;
    println!("binary round trip identical: {}", back == ensemble);
    std::fs::remove_file(&path)?;
    Ok(())
}
