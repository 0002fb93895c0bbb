//! Spatial covariance families and the separable space-time product.
//!
//! cargo run --example covariance_families

use stexceed::covariance::{
    spatial_cov, st_cov, temporal_cov, CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let families = [
        (
            "exponential",
            SpatialCovKind::Exponential {
                variance: 1.0,
                range: 0.5,
            },
        ),
        (
            "matern 0.5",
            SpatialCovKind::Matern {
                variance: 1.0,
                range: 0.5,
                smoothness: 0.5,
            },
        ),
        (
            "matern 1.5",
            SpatialCovKind::Matern {
                variance: 1.0,
                range: 0.5,
                smoothness: 1.5,
            },
        ),
        (
            "matern 2.5",
            SpatialCovKind::Matern {
                variance: 1.0,
                range: 0.5,
                smoothness: 2.5,
            },
        ),
        (
            "matern 0.8",
            SpatialCovKind::Matern {
                variance: 1.0,
                range: 0.5,
                smoothness: 0.8,
            },
        ),
    ];
    print!("{:>6}", "h");
    for (name, _) in &families {
        print!("{name:>13}");
    }
    println!();
    for k in 0..=10 {
        let h = 0.2 * k as f64;
        print!("{h:>6.2}");
        for (_, kind) in &families {
            print!("{:>13.6}", spatial_cov(h, kind)?);
        }
        println!();
    }

    let ar1 = TemporalCovKind::Ar1 { rho: 0.7 };
    println!(
        "\nAR(1) rho = 0.7: {:?}",
        (0..4)
            .map(|u| temporal_cov(u as f64, &ar1))
            .collect::<Result<Vec<_>, _>>()?
    );

    let params = CovarianceParams::new(families[0].1, ar1, NuggetSpec::Constant { sigma_eps2: 0.1 })?;
    let a = SpaceTimePoint::new(0.0, 0.0, 1.0);
    let b = SpaceTimePoint::new(0.3, 0.4, 2.0);
    println!("C(a, a) latent   = {:.6}", st_cov(&a, &a, &params, false)?);
    println!("C(a, a) observed = {:.6}", st_cov(&a, &a, &params, true)?);
    println!("C(a, b)          = {:.6}", st_cov(&a, &b, &params, true)?);
    Ok(())
}
