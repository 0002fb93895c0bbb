//! Confidence regions for the set where the field exceeds a threshold,
//! with the three-way classification and an SVG map.
//!
//! cargo run --release --example exceedance_regions -- [threshold] [alpha] [out.svg]

use std::sync::Arc;

use stexceed::condsim::ConditionalSimulator;
use stexceed::covariance::{CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind};
use stexceed::exceedance::{combine_inferences, RegionClass};
use stexceed::grid::{make_grid, Rect};
use stexceed::io::emit_plot;
use stexceed::kriging::{CovariateBuilder, Dataset, FittedModel, Observation};
use stexceed::linalg::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let u: f64 = args.first().map_or(Ok(2.5), |s| s.parse())?;
    let alpha: f64 = args.get(1).map_or(Ok(0.1), |s| s.parse())?;

    let mut rng = RngStream::new(3);
    let mut obs = Vec::new();
    for _ in 0..40 {
        let (x, y) = (rng.uniform(), rng.uniform());
        for t in [1.0, 2.0, 3.0] {
            obs.push(Observation {
                site: SpaceTimePoint::new(x, y, t).into(),
                value: 1.0 + 3.0 * x + 0.4 * rng.standard_normal(),
            });
        }
    }
    let dataset = Arc::new(Dataset::new(obs, CovariateBuilder::linear_trend(), 3.0)?);
    let params = CovarianceParams::new(
        SpatialCovKind::Exponential {
            variance: 0.15,
            range: 0.3,
        },
        TemporalCovKind::Ar1 { rho: 0.5 },
        NuggetSpec::Constant { sigma_eps2: 0.02 },
    )?;
    let model = FittedModel::new(dataset, params)?;
    let grid = make_grid(Rect::unit(), 20, 20)?;
    let sim = ConditionalSimulator::for_grid(&model, &grid)?;
    let ensemble = sim.ensemble(1000, 11)?;

    let inference = combine_inferences(sim.z_hat(), sim.krig_sd(), &ensemble, u, alpha)?;
    println!(
        "u = {u}, alpha = {alpha}: c_above = {:.3}, c_below = {:.3}, nested = {}",
        inference.above.c_alpha_hat,
        inference.below.c_alpha_hat,
        inference.is_nested()
    );
    let classes = inference.classes();
    for class in RegionClass::ALL {
        println!("{class:>22}: {}", classes.iter().filter(|&&c| c == class).count());
    }
    let out = args.get(2).cloned().unwrap_or_else(|| "exceedance_regions.svg".into());
    emit_plot(&grid, &classes, &format!("exceedance above {u}"), out.as_ref())?;
    println!("map written to {out}");
    Ok(())
}
