//! Fixtures and brute-force reference implementations shared by the
//! integration tests. The references use explicit matrix inverses and
//! their own covariance arithmetic, so they share no code with the crate.

#![allow(dead_code)]

use std::sync::Arc;

use stexceed::covariance::{CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind};
use stexceed::kriging::{CovariateBuilder, Dataset, Observation};
use stexceed::linalg::RngStream;

pub type Dense = Vec<Vec<f64>>;

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matvec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss-Jordan inverse with partial pivoting, and the log-determinant.
pub fn inverse_and_logdet(a: &Dense) -> (Dense, f64) {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let mut logdet = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        assert!(piv != 0.0, "singular matrix in oracle");
        logdet += piv.abs().ln();
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        let pivot_row = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            let f = row[c];
            if r != c && f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), logdet)
}

pub fn inverse(a: &Dense) -> Dense {
    inverse_and_logdet(a).0
}

/// Exponential x AR(1) with a constant nugget, written out directly.
#[derive(Debug, Clone, Copy)]
pub struct ExpModel {
    pub variance: f64,
    pub range: f64,
    pub rho: f64,
    pub nugget: f64,
}

impl ExpModel {
    pub fn params(&self) -> CovarianceParams {
        CovarianceParams::new(
            SpatialCovKind::Exponential {
                variance: self.variance,
                range: self.range,
            },
            TemporalCovKind::Ar1 { rho: self.rho },
            NuggetSpec::Constant {
                sigma_eps2: self.nugget,
            },
        )
        .unwrap()
    }

    pub fn latent(&self, a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
        let h = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        self.variance * (-h / self.range).exp() * self.rho.powf((a.t - b.t).abs())
    }

    pub fn observed(&self, a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
        let same = a.x == b.x && a.y == b.y && a.t == b.t;
        self.latent(a, b) + if same { self.nugget } else { 0.0 }
    }

    pub fn sigma(&self, pts: &[SpaceTimePoint]) -> Dense {
        pts.iter()
            .map(|a| pts.iter().map(|b| self.observed(a, b)).collect())
            .collect()
    }
}

pub fn design_dense(pts: &[SpaceTimePoint]) -> Dense {
    pts.iter().map(|p| vec![1.0, p.x, p.y]).collect()
}

/// GLS coefficients by explicit inverses.
pub fn oracle_gls(x: &Dense, sigma: &Dense, y: &[f64]) -> Vec<f64> {
    let si = inverse(sigma);
    let xt = transpose(x);
    let xtsi = matmul(&xt, &si);
    let info_inv = inverse(&matmul(&xtsi, x));
    matvec(&info_inv, &matvec(&xtsi, y))
}

/// Universal kriging of the latent process: `(z_hat, variance)`.
pub fn oracle_uk(model: &ExpModel, pts: &[SpaceTimePoint], y: &[f64], target: &SpaceTimePoint) -> (f64, f64) {
    let sigma = model.sigma(pts);
    let x = design_dense(pts);
    let si = inverse(&sigma);
    let beta = oracle_gls(&x, &sigma, y);
    let c: Vec<f64> = pts.iter().map(|p| model.latent(target, p)).collect();
    let x0 = vec![1.0, target.x, target.y];
    let resid: Vec<f64> = y.iter().zip(matvec(&x, &beta)).map(|(a, b)| a - b).collect();
    let sic = matvec(&si, &c);
    let z = dot(&x0, &beta) + dot(&sic, &resid);
    let xt = transpose(&x);
    let info_inv = inverse(&matmul(&matmul(&xt, &si), &x));
    let d: Vec<f64> = x0.iter().zip(matvec(&xt, &sic)).map(|(a, b)| a - b).collect();
    let var = model.latent(target, target) - dot(&c, &sic) + dot(&d, &matvec(&info_inv, &d));
    (z, var)
}

/// REML objective by explicit inverses.
pub fn oracle_reml(model: &ExpModel, pts: &[SpaceTimePoint], y: &[f64]) -> f64 {
    let sigma = model.sigma(pts);
    let x = design_dense(pts);
    let (si, logdet_s) = inverse_and_logdet(&sigma);
    let xt = transpose(&x);
    let info = matmul(&matmul(&xt, &si), &x);
    let (info_inv, logdet_i) = inverse_and_logdet(&info);
    let six = matmul(&si, &x);
    let proj = matmul(&matmul(&six, &info_inv), &transpose(&six));
    let p: Dense = si
        .iter()
        .zip(&proj)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect())
        .collect();
    0.5 * (logdet_s + logdet_i + dot(y, &matvec(&p, y)))
}

/// Random instance: `n_sites` sites over two times, linear-trend design.
pub struct Instance {
    pub model: ExpModel,
    pub points: Vec<SpaceTimePoint>,
    pub values: Vec<f64>,
}

impl Instance {
    pub fn random(seed: u64, max_obs: usize) -> Self {
        let mut rng = RngStream::new(seed);
        let n_sites = 3 + (rng.uniform() * ((max_obs / 2 - 2) as f64)) as usize;
        let model = ExpModel {
            variance: 0.5 + 2.0 * rng.uniform(),
            range: 0.1 + 0.8 * rng.uniform(),
            rho: 0.1 + 0.8 * rng.uniform(),
            nugget: 0.05 + 0.5 * rng.uniform(),
        };
        let sites: Vec<(f64, f64)> = (0..n_sites).map(|_| (rng.uniform(), rng.uniform())).collect();
        let points: Vec<SpaceTimePoint> = (1..=2)
            .flat_map(|t| sites.iter().map(move |&(x, y)| SpaceTimePoint::new(x, y, t as f64)))
            .collect();
        let values = points
            .iter()
            .map(|p| 1.0 + 2.0 * p.x - p.y + rng.standard_normal())
            .collect();
        Self { model, points, values }
    }

    pub fn dataset(&self, target_time: f64) -> Arc<Dataset> {
        let obs = self
            .points
            .iter()
            .zip(&self.values)
            .map(|(p, &v)| Observation {
                site: (*p).into(),
                value: v,
            })
            .collect();
        Arc::new(Dataset::new(obs, CovariateBuilder::linear_trend(), target_time).unwrap())
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Writes `obs.csv` (columns `x, y, t, z`) simulated from a trend field
/// over the unit square, and an analysis config next to it. Returns the
/// config path. `exceedance` is spliced in as the `[exceedance]` body.
pub fn write_cli_fixture(dir: &std::path::Path, exceedance: &str, estimate: bool) -> std::path::PathBuf {
    use stexceed::simstudy::{simulate_truth, ExperimentConfig, MeanPattern};

    let cfg = ExperimentConfig {
        n_sites: 30,
        nx: 8,
        ny: 8,
        ..ExperimentConfig::desk(MeanPattern::Trend, 0.5, 0.5, 0.05)
    };
    let truth = simulate_truth(&cfg, &cfg.grid().unwrap(), 0).unwrap();
    let mut csv = String::from("x,y,t,z\n");
    for o in &truth.observations {
        let p = o.site.point;
        csv.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.t, o.value));
    }
    std::fs::write(dir.join("obs.csv"), csv).unwrap();
    let config = format!(
        r#"[data]
path = "obs.csv"
x = "x"
y = "y"
time = "t"
value = "z"

[model]
covariates = ["intercept", "coord1"]
target_time = 4.0

[model.covariance.spatial]
family = "exponential"
variance = 1.0
range = 0.5

[model.covariance.temporal]
family = "ar1"
rho = 0.5

[model.covariance.nugget.constant]
sigma_eps2 = 0.05

[grid]
kind = "rect"
rect = [0.0, 0.0, 1.0, 1.0]
nx = 12
ny = 10

[exceedance]
{exceedance}

[fit]
estimate = {estimate}

[output]
dir = "out"
"#
    );
    let path = dir.join("analysis.toml");
    std::fs::write(&path, config).unwrap();
    path
}
