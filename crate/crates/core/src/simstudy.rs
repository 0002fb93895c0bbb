//! Monte Carlo coverage study for the exceedance confidence regions.
//!
//! Each replicate draws sites, simulates the latent field at the observed
//! times and on the grid at the target time, builds the regions from the
//! observed data only, and checks whether the above-threshold confidence
//! region contains the true exceedance set.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condsim::ConditionalSimulator;
use crate::covariance::{
    build_cov_matrix, CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind,
};
use crate::error::{Error, Result};
use crate::exceedance::{combine_inferences, type1_quantile};
use crate::grid::{make_grid, PredictionGrid, Rect};
use crate::kriging::{CovariateBuilder, Dataset, FittedModel, Observation, Site};
use crate::linalg::{derive_seed, factorize, mvn_sample, RngStream};
use crate::reml::{fit, max_site_distance, sample_variance, FitConfig};

const TAG_REPLICATE: u64 = 0x5245_504c;
const TAG_CONDSIM: u64 = 0x434f_4e44;

/// Mean structures of the synthetic study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanPattern {
    Trend,
    Cone,
    Cup,
    Waves,
}

impl MeanPattern {
    pub const ALL: [MeanPattern; 4] = [
        MeanPattern::Trend,
        MeanPattern::Cone,
        MeanPattern::Cup,
        MeanPattern::Waves,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeanPattern::Trend => "trend",
            MeanPattern::Cone => "cone",
            MeanPattern::Cup => "cup",
            MeanPattern::Waves => "waves",
        }
    }

    pub fn domain(self) -> Rect {
        match self {
            MeanPattern::Trend => Rect::unit(),
            MeanPattern::Cone | MeanPattern::Cup => Rect {
                x_min: -0.5,
                y_min: -0.5,
                x_max: 0.5,
                y_max: 0.5,
            },
            MeanPattern::Waves => Rect {
                x_min: -1.5 * PI,
                y_min: -2.0 * PI,
                x_max: 2.5 * PI,
                y_max: 2.0 * PI,
            },
        }
    }

    /// The covariate vector `x(s)` that defines the true mean.
    pub fn covariates(self, x: f64, y: f64) -> [f64; 3] {
        match self {
            MeanPattern::Trend => [1.0, x, x],
            MeanPattern::Cone | MeanPattern::Cup => [1.0, x * x, y * y],
            MeanPattern::Waves => [1.0, x.cos(), y.sin()],
        }
    }

    pub fn beta(self) -> [f64; 3] {
        match self {
            MeanPattern::Trend => [1.0, 3.0, 3.0],
            MeanPattern::Cone => [1.0, -20.0, -20.0],
            MeanPattern::Cup => [1.0, 20.0, 20.0],
            MeanPattern::Waves => [1.0, 5.0, 5.0],
        }
    }

    /// Covariates used when fitting. For the trend the two identical
    /// columns are merged, since the literal design is rank deficient.
    pub fn fit_covariates(self) -> CovariateBuilder {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        match self {
            MeanPattern::Trend => CovariateBuilder::new(names(&["intercept", "coord1"]), |s| vec![1.0, s.point.x]),
            MeanPattern::Cone | MeanPattern::Cup => {
                CovariateBuilder::new(names(&["intercept", "coord1_sq", "coord2_sq"]), |s| {
                    vec![1.0, s.point.x * s.point.x, s.point.y * s.point.y]
                })
            }
            MeanPattern::Waves => CovariateBuilder::new(names(&["intercept", "cos_coord1", "sin_coord2"]), |s| {
                vec![1.0, s.point.x.cos(), s.point.y.sin()]
            }),
        }
    }
}

/// `x(s)' beta` for a location inside the pattern's domain.
pub fn mean_value(pattern: MeanPattern, s: [f64; 2]) -> Result<f64> {
    if !pattern.domain().contains(s) {
        return Err(Error::ParameterDomain(format!(
            "({}, {}) lies outside the {} domain",
            s[0],
            s[1],
            pattern.name()
        )));
    }
    let x = pattern.covariates(s[0], s[1]);
    Ok(x.iter().zip(pattern.beta()).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// Type-1 quantile of the simulated grid values at the target time.
    Percentile(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub pattern: MeanPattern,
    pub phi: f64,
    pub rho: f64,
    pub variance: f64,
    pub nugget: f64,
    pub n_sites: usize,
    pub observed_times: Vec<f64>,
    pub target_time: f64,
    pub nx: usize,
    pub ny: usize,
    pub threshold: ThresholdRule,
    pub n_realizations: usize,
    pub levels: Vec<f64>,
    pub n_replicates: usize,
    pub covariance_known: bool,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk(MeanPattern::Trend, 0.5, 0.1, 0.0)
    }
}

impl ExperimentConfig {
    /// 25 x 25 grid, 500 realizations, 200 replicates.
    pub fn desk(pattern: MeanPattern, phi: f64, rho: f64, nugget: f64) -> Self {
        Self {
            pattern,
            phi,
            rho,
            variance: 1.0,
            nugget,
            n_sites: 100,
            observed_times: vec![1.0, 2.0, 3.0],
            target_time: 4.0,
            nx: 25,
            ny: 25,
            threshold: ThresholdRule::Percentile(0.9),
            n_realizations: 500,
            levels: vec![0.90, 0.95],
            n_replicates: 200,
            covariance_known: true,
            master_seed: 20_130_901,
        }
    }

    /// 50 x 50 grid and 2000 realizations.
    pub fn full_scale(pattern: MeanPattern, phi: f64, rho: f64, nugget: f64) -> Self {
        Self {
            nx: 50,
            ny: 50,
            n_realizations: 2000,
            ..Self::desk(pattern, phi, rho, nugget)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sites == 0 || self.nx == 0 || self.ny == 0 || self.n_realizations == 0 || self.n_replicates == 0 {
            return bad("counts must be >= 1");
        }
        if self.observed_times.is_empty() {
            return bad("at least one observed time is required");
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad("confidence levels must lie in (0, 1)");
        }
        if let ThresholdRule::Percentile(p) = self.threshold {
            if !(p > 0.0 && p < 1.0) {
                return bad("threshold percentile must lie in (0, 1)");
            }
        }
        self.true_params().map(|_| ())
    }

    pub fn true_params(&self) -> Result<CovarianceParams> {
        CovarianceParams::new(
            SpatialCovKind::Exponential {
                variance: self.variance,
                range: self.phi,
            },
            TemporalCovKind::Ar1 { rho: self.rho },
            NuggetSpec::Constant {
                sigma_eps2: self.nugget,
            },
        )
    }

    pub fn grid(&self) -> Result<PredictionGrid> {
        make_grid(self.pattern.domain(), self.nx, self.ny)
    }

    /// Seed shared by every stage of replicate `index`; independent of
    /// whether the covariance is known.
    pub fn replicate_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, TAG_REPLICATE, index as u64)
    }
}

/// One simulated truth.
#[derive(Debug, Clone)]
pub struct Truth {
    pub sites: Vec<[f64; 2]>,
    /// Observations ordered time-major: all sites at the first time, then
    /// all sites at the second, and so on.
    pub observations: Vec<Observation>,
    /// Latent values at the observation points, in the same order.
    pub latent_obs: Vec<f64>,
    /// Latent values at the grid centers at the target time.
    pub latent_grid: Vec<f64>,
    pub threshold: f64,
    pub exceedance: Vec<bool>,
}

fn draw_sites(rect: Rect, n: usize, rng: &mut RngStream) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            let ux = rng.uniform();
            let uy = rng.uniform();
            [rect.x_min + ux * rect.width(), rect.y_min + uy * rect.height()]
        })
        .collect()
}

pub fn simulate_truth(config: &ExperimentConfig, grid: &PredictionGrid, replicate: usize) -> Result<Truth> {
    let params = config.true_params()?;
    let domain = config.pattern.domain();
    let mut rng = RngStream::child(config.replicate_seed(replicate), 0);
    let grid_points = grid.points_at(config.target_time);

    let mut attempt = 0;
    let (sites, obs_points, latent) = loop {
        let sites = draw_sites(domain, config.n_sites, &mut rng);
        let obs_points: Vec<SpaceTimePoint> = config
            .observed_times
            .iter()
            .flat_map(|&t| sites.iter().map(move |s| SpaceTimePoint::new(s[0], s[1], t)))
            .collect();
        let mut all = obs_points.clone();
        all.extend_from_slice(&grid_points);
        let cov = build_cov_matrix(&all, &params, false)?;
        match factorize(&cov) {
            Ok(factor) => {
                let mean: Vec<f64> = all
                    .iter()
                    .map(|p| mean_value(config.pattern, [p.x, p.y]))
                    .collect::<Result<_>>()?;
                break (sites, obs_points, mvn_sample(&mean, &factor, &mut rng)?);
            }
            Err(e @ Error::NotPositiveDefinite { .. }) if attempt > 0 => return Err(e),
            Err(Error::NotPositiveDefinite { .. }) => attempt += 1,
            Err(e) => return Err(e),
        }
    };

    let n_obs = obs_points.len();
    let latent_obs = latent[..n_obs].to_vec();
    let latent_grid = latent[n_obs..].to_vec();
    let sd = config.nugget.sqrt();
    let observations = obs_points
        .iter()
        .zip(&latent_obs)
        .map(|(p, z)| {
            // always consume the draw so the stream layout does not depend on the nugget
            let e = rng.standard_normal();
            Observation {
                site: Site::from(*p),
                value: if sd > 0.0 { z + sd * e } else { *z },
            }
        })
        .collect();
    let threshold = match config.threshold {
        ThresholdRule::Percentile(p) => type1_quantile(&latent_grid, p),
        ThresholdRule::Fixed(u) => u,
    };
    let exceedance = latent_grid.iter().map(|&z| z >= threshold).collect();
    Ok(Truth {
        sites,
        observations,
        latent_obs,
        latent_grid,
        threshold,
        exceedance,
    })
}

/// Starting values for the estimated-covariance runs.
pub fn estimation_start(dataset: &Dataset) -> Result<FitConfig> {
    let v = sample_variance(&dataset.values());
    let d = max_site_distance(&dataset.points());
    let initial = CovarianceParams::new(
        SpatialCovKind::Exponential {
            variance: v,
            range: 0.5 * d,
        },
        TemporalCovKind::Ar1 { rho: 0.5 },
        NuggetSpec::Constant { sigma_eps2: 0.05 * v },
    )?;
    Ok(FitConfig::new(initial))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelOutcome {
    pub level: f64,
    pub covered: bool,
    pub region_px: usize,
    /// Whether conservative ⊆ predicted ⊆ liberal held.
    pub nested: bool,
    /// The above-threshold confidence region.
    pub region: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub threshold: f64,
    pub exceedance_px: usize,
    pub levels: Vec<LevelOutcome>,
    /// Estimated parameters, for estimated-covariance runs.
    pub estimate: Option<CovarianceParams>,
}

pub fn run_replicate(config: &ExperimentConfig, grid: &PredictionGrid, replicate: usize) -> Result<ReplicateOutcome> {
    let truth = simulate_truth(config, grid, replicate)?;
    let dataset = Arc::new(Dataset::new(
        truth.observations.clone(),
        config.pattern.fit_covariates(),
        config.target_time,
    )?);
    let (model, estimate) = if config.covariance_known {
        (FittedModel::new(dataset, config.true_params()?)?, None)
    } else {
        let start = estimation_start(&dataset)?;
        let fitted = fit(dataset, &start)?;
        let theta = fitted.model.params().clone();
        (fitted.model, Some(theta))
    };
    let sim = ConditionalSimulator::for_grid(&model, grid)?;
    let seed = derive_seed(config.replicate_seed(replicate), TAG_CONDSIM, 0);
    let ensemble = sim.ensemble(config.n_realizations, seed)?;
    let levels = config
        .levels
        .iter()
        .map(|&level| {
            let inference = combine_inferences(sim.z_hat(), sim.krig_sd(), &ensemble, truth.threshold, 1.0 - level)?;
            let region = inference.liberal().to_vec();
            let covered = truth.exceedance.iter().zip(&region).all(|(&e, &s)| !e || s);
            Ok(LevelOutcome {
                level,
                covered,
                region_px: region.iter().filter(|&&s| s).count(),
                nested: inference.is_nested(),
                region,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutcome {
        index: replicate,
        threshold: truth.threshold,
        exceedance_px: truth.exceedance.iter().filter(|&&e| e).count(),
        levels,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub pattern: MeanPattern,
    pub phi: f64,
    pub rho: f64,
    pub nugget: f64,
    pub level: f64,
    pub coverage: f64,
    pub se: f64,
    pub mean_region_px: f64,
    pub n_fail: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<CoverageRow>,
    /// Per level, the fraction of successful replicates whose region
    /// contains each pixel.
    pub inclusion_frequency: Vec<Vec<f64>>,
    pub outcomes: Vec<ReplicateOutcome>,
    /// `(replicate, error message)` for each failed replicate.
    pub failures: Vec<(usize, String)>,
    pub n_replicates: usize,
}

impl ExperimentResult {
    /// More than 5% failed replicates makes the experiment invalid.
    pub fn is_valid(&self) -> bool {
        self.failures.len() * 20 <= self.n_replicates
    }

    pub fn ensure_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::ExperimentInvalid {
                failed: self.failures.len(),
                total: self.n_replicates,
            })
        }
    }

    pub fn row(&self, level: f64) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.level == level)
    }
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// All replicates, in parallel on the current rayon pool; the result does
/// not depend on the number of workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let grid = config.grid()?;
    let results: Vec<Result<ReplicateOutcome>> = (0..config.n_replicates)
        .into_par_iter()
        .map(|i| run_replicate(config, &grid, i))
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let n_ok = outcomes.len();
    let m = grid.len();
    let mut rows = Vec::new();
    let mut inclusion_frequency = Vec::new();
    for (k, &level) in config.levels.iter().enumerate() {
        let covered = outcomes.iter().filter(|o| o.levels[k].covered).count();
        let coverage = if n_ok > 0 {
            covered as f64 / n_ok as f64
        } else {
            f64::NAN
        };
        let mean_region_px = if n_ok > 0 {
            outcomes.iter().map(|o| o.levels[k].region_px as f64).sum::<f64>() / n_ok as f64
        } else {
            f64::NAN
        };
        let mut freq = vec![0.0; m];
        for o in &outcomes {
            for (f, &s) in freq.iter_mut().zip(&o.levels[k].region) {
                if s {
                    *f += 1.0;
                }
            }
        }
        if n_ok > 0 {
            freq.iter_mut().for_each(|f| *f /= n_ok as f64);
        }
        inclusion_frequency.push(freq);
        rows.push(CoverageRow {
            pattern: config.pattern,
            phi: config.phi,
            rho: config.rho,
            nugget: config.nugget,
            level,
            coverage,
            se: if n_ok > 0 {
                binomial_se(coverage, n_ok)
            } else {
                f64::NAN
            },
            mean_region_px,
            n_fail: failures.len(),
        });
    }
    Ok(ExperimentResult {
        rows,
        inclusion_frequency,
        outcomes,
        failures,
        n_replicates: config.n_replicates,
    })
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

pub const COVERAGE_HEADER: [&str; 9] = [
    "pattern",
    "phi",
    "rho",
    "nugget",
    "level",
    "coverage",
    "se",
    "mean_region_px",
    "n_fail",
];

pub fn write_coverage_csv<W: Write>(out: W, rows: &[CoverageRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Data(format!("writing coverage table: {e}"));
    w.write_record(COVERAGE_HEADER).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.pattern.name().to_string(),
            r.phi.to_string(),
            r.rho.to_string(),
            r.nugget.to_string(),
            r.level.to_string(),
            r.coverage.to_string(),
            r.se.to_string(),
            r.mean_region_px.to_string(),
            r.n_fail.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing coverage table: {e}")))
}
