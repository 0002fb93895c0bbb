//! Universal kriging with a linear trend: single-site predictions and the
//! batched weight matrix over a grid.
//!
//! cargo run --example kriging_predict

use std::sync::Arc;

use stexceed::covariance::{CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind};
use stexceed::grid::{make_grid, Rect};
use stexceed::kriging::{uk_predict, uk_weight_matrix, CovariateBuilder, Dataset, FittedModel, Observation, Site};
use stexceed::linalg::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = RngStream::new(1);
    let mut obs = Vec::new();
    for _ in 0..20 {
        let (x, y) = (rng.uniform(), rng.uniform());
        for t in [1.0, 2.0] {
            obs.push(Observation {
                site: SpaceTimePoint::new(x, y, t).into(),
                value: 1.0 + 2.0 * x - y + 0.5 * rng.standard_normal(),
            });
        }
    }
    let dataset = Arc::new(Dataset::new(obs, CovariateBuilder::linear_trend(), 2.0)?);
    let params = CovarianceParams::new(
        SpatialCovKind::Exponential {
            variance: 0.25,
            range: 0.3,
        },
        TemporalCovKind::Ar1 { rho: 0.6 },
        NuggetSpec::Constant { sigma_eps2: 0.02 },
    )?;
    let model = FittedModel::new(dataset, params)?;
    println!("beta_hat = {:?}", model.beta_hat());

    for (x, y) in [(0.5, 0.5), (0.1, 0.9), (0.9, 0.1)] {
        let p = uk_predict(&model, &Site::from(SpaceTimePoint::new(x, y, 2.0)))?;
        println!("z_hat({x}, {y}) = {:.4} +/- {:.4}", p.z_hat, p.krig_sd());
    }

    let grid = make_grid(Rect::unit(), 6, 6)?;
    let sites: Vec<Site> = grid.points_at(2.0).into_iter().map(Site::from).collect();
    let w = uk_weight_matrix(&model, &sites)?;
    println!("\nprediction map at t = 2 (north up):");
    for iy in (0..grid.ny).rev() {
        let row: Vec<String> = (0..grid.nx)
            .map(|ix| format!("{:6.2}", w.z_hat[iy * grid.nx + ix]))
            .collect();
        println!("{}", row.join(""));
    }
    Ok(())
}
