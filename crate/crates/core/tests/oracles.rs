mod common;

use std::sync::Arc;

use common::*;
use stexceed::condsim::{conditional_realization, simulate_joint, ConditionalSimulator};
use stexceed::covariance::{CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind};
use stexceed::grid::{convex_hull, make_grid, mask_convex_hull, Rect};
use stexceed::kriging::{uk_predict, CovariateBuilder, Dataset, FittedModel, Observation, Site};
use stexceed::linalg::{factorize, gls_estimate, RngStream};
use stexceed::reml::reml_nll;

#[test]
fn kriging_matches_explicit_inverse() {
    for seed in 0..20 {
        let inst = Instance::random(seed, 15);
        let model = FittedModel::new(inst.dataset(3.0), inst.model.params()).unwrap();
        for target in [
            SpaceTimePoint::new(0.5, 0.5, 3.0),
            SpaceTimePoint::new(0.1, 0.9, 2.0),
            inst.points[0],
        ] {
            let p = uk_predict(&model, &Site::from(target)).unwrap();
            let (z, v) = oracle_uk(&inst.model, &inst.points, &inst.values, &target);
            assert!(close(p.z_hat, z, 1e-8), "seed {seed}: {} vs {z}", p.z_hat);
            assert!(close(p.krig_var, v, 1e-8), "seed {seed}: {} vs {v}", p.krig_var);
        }
    }
}

#[test]
fn gls_matches_explicit_inverse() {
    for seed in 100..120 {
        let inst = Instance::random(seed, 15);
        let sigma = stexceed::covariance::build_cov_matrix(&inst.points, &inst.model.params(), true).unwrap();
        let x = inst.dataset(3.0).design_matrix().unwrap();
        let est = gls_estimate(&x, &factorize(&sigma).unwrap(), &inst.values).unwrap();
        let beta = oracle_gls(
            &design_dense(&inst.points),
            &inst.model.sigma(&inst.points),
            &inst.values,
        );
        for (a, b) in est.beta.iter().zip(&beta) {
            assert!(close(*a, *b, 1e-8), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn reml_matches_explicit_inverse() {
    for seed in 200..220 {
        let inst = Instance::random(seed, 15);
        let got = reml_nll(&inst.model.params(), &inst.dataset(3.0)).unwrap();
        let want = oracle_reml(&inst.model, &inst.points, &inst.values);
        assert!(close(got, want, 1e-8), "seed {seed}: {got} vs {want}");
    }
}

fn single_obs_model(variance: f64) -> FittedModel {
    let ds = Dataset::new(
        vec![Observation {
            site: SpaceTimePoint::new(0.0, 0.0, 1.0).into(),
            value: 0.3,
        }],
        CovariateBuilder::intercept(),
        1.0,
    )
    .unwrap();
    let params = CovarianceParams::new(
        SpatialCovKind::Exponential { variance, range: 1e-3 },
        TemporalCovKind::Ar1 { rho: 0.5 },
        NuggetSpec::Constant { sigma_eps2: 0.1 },
    )
    .unwrap();
    FittedModel::new(Arc::new(ds), params).unwrap()
}

#[test]
fn joint_draws_independent_without_cross_covariance() {
    let model = single_obs_model(2.0);
    let grid = [SpaceTimePoint::new(100.0, 100.0, 1.0)];
    let n = 100_000;
    let (mut sy, mut sz, mut syy, mut szz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (y, z) = simulate_joint(&model, &grid, &mut RngStream::child(11, i)).unwrap();
        sy += y[0];
        sz += z[0];
        syy += y[0] * y[0];
        szz += z[0] * z[0];
        syz += y[0] * z[0];
    }
    let nf = n as f64;
    let cov = syz / nf - sy * sz / (nf * nf);
    let r = cov / ((syy / nf - (sy / nf).powi(2)) * (szz / nf - (sz / nf).powi(2))).sqrt();
    assert!(r.abs() < 0.01, "r = {r}");
    // single grid point with variance 2: within 3 SE of 2
    let var = szz / nf - (sz / nf).powi(2);
    let se = 2.0 * (2.0 / nf).sqrt();
    assert!((var - 2.0).abs() < 3.0 * se, "var = {var}");
}

#[test]
fn conditional_realization_matches_hand_arithmetic() {
    let mut rng = RngStream::new(5);
    let (n, m) = (4, 3);
    let lambda = faer::Mat::from_fn(n, m, |_, _| rng.standard_normal());
    let z_hat: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
    let y_c: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let z_c: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
    let got = conditional_realization(&z_hat, &lambda, &y_c, &z_c).unwrap();
    for j in 0..m {
        let mut ly = 0.0;
        for i in 0..n {
            ly += lambda[(i, j)] * y_c[i];
        }
        assert!((got[j] - (z_hat[j] + z_c[j] - ly)).abs() < 1e-14);
    }
}

#[test]
fn ensemble_golden_vector_is_reproducible() {
    let inst = Instance::random(3, 12);
    let model = FittedModel::new(inst.dataset(3.0), inst.model.params()).unwrap();
    let sites: Vec<Site> = [(0.2, 0.3), (0.8, 0.6)]
        .iter()
        .map(|&(x, y)| SpaceTimePoint::new(x, y, 3.0).into())
        .collect();
    let sim = ConditionalSimulator::new(&model, &sites).unwrap();
    let a = sim.ensemble(1, 42).unwrap();
    let b = sim.ensemble(1, 42).unwrap();
    assert_eq!(a.values(), b.values());
    assert_ne!(a.values(), sim.ensemble(1, 43).unwrap().values());
}

#[test]
fn hull_mask_passes_half_plane_test() {
    let mut rng = RngStream::new(77);
    let pts: Vec<[f64; 2]> = (0..20).map(|_| [rng.uniform(), rng.uniform()]).collect();
    let hull = convex_hull(&pts).unwrap();
    let grid = mask_convex_hull(&make_grid(Rect::unit(), 30, 30).unwrap(), &pts).unwrap();
    let full = make_grid(Rect::unit(), 30, 30).unwrap();
    // orientation-agnostic: inside iff on the same side of every edge (or on it)
    let inside = |p: [f64; 2]| {
        let k = hull.len();
        let signs: Vec<f64> = (0..k)
            .map(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % k]);
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            })
            .collect();
        signs.iter().all(|&s| s >= -1e-12) || signs.iter().all(|&s| s <= 1e-12)
    };
    for c in grid.centers() {
        assert!(inside(c));
    }
    let kept = full.centers().filter(|&c| inside(c)).count();
    assert_eq!(kept, grid.len());
}
