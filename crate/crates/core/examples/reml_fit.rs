//! REML estimation of the covariance parameters from simulated data.
//!
//! cargo run --release --example reml_fit

use std::sync::Arc;

use stexceed::covariance::{
    build_cov_matrix, CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind,
};
use stexceed::kriging::{CovariateBuilder, Dataset, Observation};
use stexceed::linalg::{factorize, mvn_sample, RngStream};
use stexceed::reml::{fit, FitConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = CovarianceParams::new(
        SpatialCovKind::Exponential {
            variance: 1.0,
            range: 0.3,
        },
        TemporalCovKind::Ar1 { rho: 0.6 },
        NuggetSpec::Constant { sigma_eps2: 0.1 },
    )?;
    let mut rng = RngStream::new(1);
    let sites: Vec<(f64, f64)> = (0..60).map(|_| (rng.uniform(), rng.uniform())).collect();
    let points: Vec<SpaceTimePoint> = [1.0, 2.0, 3.0]
        .iter()
        .flat_map(|&t| sites.iter().map(move |&(x, y)| SpaceTimePoint::new(x, y, t)))
        .collect();
    let mean: Vec<f64> = points.iter().map(|p| 1.0 + 2.0 * p.x).collect();
    let y = mvn_sample(&mean, &factorize(&build_cov_matrix(&points, &truth, true)?)?, &mut rng)?;
    let obs = points
        .iter()
        .zip(y)
        .map(|(p, value)| Observation {
            site: (*p).into(),
            value,
        })
        .collect();
    let dataset = Arc::new(Dataset::new(obs, CovariateBuilder::linear_trend(), 3.0)?);

    let start = CovarianceParams::new(
        SpatialCovKind::Exponential {
            variance: 0.5,
            range: 0.5,
        },
        TemporalCovKind::Ar1 { rho: 0.5 },
        NuggetSpec::Constant { sigma_eps2: 0.05 },
    )?;
    let result = fit(dataset, &FitConfig::new(start))?;
    println!("truth:    {truth:?}");
    println!("estimate: {:?}", result.model.params());
    println!("beta_hat: {:?}", result.model.beta_hat());
    println!("{:?}", result.diagnostics);
    Ok(())
}
