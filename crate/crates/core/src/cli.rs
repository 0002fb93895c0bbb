//! Configuration files and the `fit`, `exceed` and `simstudy` commands.
//!
//! Relative paths in a configuration file are resolved against the file's
//! directory. The only environment override is `STEXCEED_OUTPUT_DIR`,
//! which replaces `[output] dir`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::condsim::{ConditionalEnsemble, ConditionalSimulator};
use crate::covariance::CovarianceParams;
use crate::error::{Error, Result};
use crate::exceedance::{combine_inferences, Direction, Inference, RegionClass};
use crate::grid::{grid_for_polygon, make_grid, mask_convex_hull, mask_polygon, PredictionGrid, Rect};
use crate::io::{
    emit_plot, ingest_csv, read_grid_covariates, read_polygon_csv, write_mask_csv, ColumnMapping, MaskRow,
    ValueTransform,
};
use crate::kriging::{CovariateBuilder, Dataset, FittedModel, Site};
use crate::reml::{fit, FitConfig, FitDiagnostics, FreeParams};
use crate::simstudy::{run_experiment, write_coverage_csv, ExperimentConfig, ExperimentResult};

pub const OUTPUT_DIR_ENV: &str = "STEXCEED_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub x: String,
    pub y: String,
    pub time: String,
    pub value: String,
    /// Column holding the `elevation` covariate; defaults to `elevation`.
    #[serde(default)]
    pub elevation: Option<String>,
    #[serde(default)]
    pub transform: ValueTransform,
}

fn default_covariates() -> Vec<String> {
    vec!["intercept".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `intercept`, `coord1`, `coord2`, `elevation`, or the name of a
    /// column present in both the data file and the grid covariate file.
    #[serde(default = "default_covariates")]
    pub covariates: Vec<String>,
    pub target_time: f64,
    /// Starting (or fixed) covariance parameters.
    pub covariance: CovarianceParams,
    #[serde(default)]
    pub free: FreeParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Rect,
    Polygon,
    ConvexHull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kind: GridKind,
    /// `[x_min, y_min, x_max, y_max]`; required for `rect`, otherwise the
    /// bounding box of the polygon or of the data sites.
    #[serde(default)]
    pub rect: Option<[f64; 4]>,
    /// CSV ring with columns `x, y`.
    #[serde(default)]
    pub polygon: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    /// CSV keyed by `ix, iy` with one column per non-coordinate covariate.
    #[serde(default)]
    pub covariates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExceedanceSection {
    pub thresholds: Vec<f64>,
    pub alpha: f64,
    /// Number of conditional realizations.
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    /// Also write the ensemble as `ensemble.bin`.
    #[serde(default)]
    pub dump_ensemble: bool,
}

fn default_direction() -> Direction {
    Direction::Above
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Estimate the free parameters by REML; otherwise use them as given.
    pub estimate: bool,
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub ridge: bool,
    pub multi_start: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            estimate: true,
            max_evals: 2000,
            x_tol: 1e-6,
            f_tol: 1e-8,
            ridge: false,
            multi_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("stexceed-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub grid: GridSection,
    /// Required by `exceed`, ignored by `fit`.
    #[serde(default)]
    pub exceedance: Option<ExceedanceSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn output_override(dir: &mut PathBuf, base: &Path) {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => *dir = PathBuf::from(v),
        _ => resolve(base, dir),
    }
}

const BUILTIN_COVARIATES: [&str; 3] = ["intercept", "coord1", "coord2"];

impl AnalysisConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_toml(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        output_override(&mut cfg.output.dir, base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.data.path);
        if let Some(p) = self.grid.polygon.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = self.grid.covariates.as_mut() {
            resolve(base, p);
        }
        resolve(base, &mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.model.covariates.is_empty() {
            return bad("at least one covariate is required".into());
        }
        for (i, c) in self.model.covariates.iter().enumerate() {
            if self.model.covariates[..i].contains(c) {
                return bad(format!("covariate '{c}' listed twice"));
            }
        }
        self.model.covariance.validate()?;
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return bad("grid nx and ny must be >= 1".into());
        }
        match self.grid.kind {
            GridKind::Rect if self.grid.rect.is_none() => return bad("grid kind 'rect' needs 'rect'".into()),
            GridKind::Polygon if self.grid.polygon.is_none() => {
                return bad("grid kind 'polygon' needs 'polygon'".into())
            }
            _ => {}
        }
        if !self.aux_names().is_empty() && self.grid.covariates.is_none() {
            return bad(format!("covariates {:?} need a grid covariate file", self.aux_names()));
        }
        if let Some(ex) = &self.exceedance {
            if !(ex.alpha > 0.0 && ex.alpha < 1.0) {
                return bad(format!("alpha must lie in (0, 1), got {}", ex.alpha));
            }
            if ex.samples < 100 {
                return bad(format!("samples must be >= 100, got {}", ex.samples));
            }
            if ex.thresholds.is_empty() || ex.thresholds.iter().any(|u| !u.is_finite()) {
                return bad("thresholds must be a non-empty list of finite numbers".into());
            }
            for (i, u) in ex.thresholds.iter().enumerate() {
                if ex.thresholds[..i].contains(u) {
                    return bad(format!("threshold {u} listed twice"));
                }
            }
        }
        let f = &self.fit;
        if f.max_evals == 0 || f.x_tol.is_nan() || f.x_tol <= 0.0 || f.f_tol.is_nan() || f.f_tol <= 0.0 {
            return bad("fit tolerances and max_evals must be positive".into());
        }
        Ok(())
    }

    /// Covariates read from files rather than computed from coordinates.
    pub fn aux_names(&self) -> Vec<String> {
        self.model
            .covariates
            .iter()
            .filter(|c| !BUILTIN_COVARIATES.contains(&c.as_str()))
            .cloned()
            .collect()
    }

    pub fn column_mapping(&self) -> ColumnMapping {
        let aux = self
            .aux_names()
            .into_iter()
            .map(|name| match (name.as_str(), &self.data.elevation) {
                ("elevation", Some(col)) => col.clone(),
                _ => name,
            })
            .collect();
        ColumnMapping {
            x: self.data.x.clone(),
            y: self.data.y.clone(),
            time: self.data.time.clone(),
            value: self.data.value.clone(),
            aux,
            transform: self.data.transform,
        }
    }

    pub fn covariate_builder(&self) -> CovariateBuilder {
        let aux = self.aux_names();
        enum Term {
            One,
            X,
            Y,
            Aux(usize),
        }
        let terms: Vec<Term> = self
            .model
            .covariates
            .iter()
            .map(|c| match c.as_str() {
                "intercept" => Term::One,
                "coord1" => Term::X,
                "coord2" => Term::Y,
                other => Term::Aux(aux.iter().position(|a| a == other).expect("aux name")),
            })
            .collect();
        CovariateBuilder::new(self.model.covariates.clone(), move |s: &Site| {
            terms
                .iter()
                .map(|t| match t {
                    Term::One => 1.0,
                    Term::X => s.point.x,
                    Term::Y => s.point.y,
                    Term::Aux(i) => s.aux.get(*i).copied().unwrap_or(f64::NAN),
                })
                .collect()
        })
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            initial: self.model.covariance.clone(),
            free: if self.fit.estimate {
                self.model.free
            } else {
                FreeParams::none()
            },
            bounds: None,
            max_evals: self.fit.max_evals,
            x_tol: self.fit.x_tol,
            f_tol: self.fit.f_tol,
            ridge: self.fit.ridge,
            multi_start: self.fit.multi_start,
        }
    }
}

pub fn load_dataset(cfg: &AnalysisConfig) -> Result<Arc<Dataset>> {
    Ok(Arc::new(ingest_csv(
        &cfg.data.path,
        &cfg.column_mapping(),
        cfg.covariate_builder(),
        cfg.model.target_time,
    )?))
}

pub fn build_grid(cfg: &AnalysisConfig, dataset: &Dataset) -> Result<PredictionGrid> {
    let g = &cfg.grid;
    let rect = g.rect.map(|r| Rect::new(r[0], r[1], r[2], r[3])).transpose()?;
    match g.kind {
        GridKind::Rect => make_grid(rect.expect("validated"), g.nx, g.ny),
        GridKind::Polygon => {
            let ring = read_polygon_csv(g.polygon.as_ref().expect("validated"))?;
            match rect {
                Some(r) => mask_polygon(&make_grid(r, g.nx, g.ny)?, &ring),
                None => grid_for_polygon(&ring, g.nx, g.ny),
            }
        }
        GridKind::ConvexHull => {
            let sites: Vec<[f64; 2]> = dataset.points().iter().map(|p| [p.x, p.y]).collect();
            let r = match rect {
                Some(r) => r,
                None => Rect::bounding(&sites)?,
            };
            mask_convex_hull(&make_grid(r, g.nx, g.ny)?, &sites)
        }
    }
}

/// Grid pixels as prediction sites at the target time.
pub fn grid_sites(cfg: &AnalysisConfig, grid: &PredictionGrid) -> Result<Vec<Site>> {
    let points = grid.points_at(cfg.model.target_time);
    let aux = cfg.aux_names();
    if aux.is_empty() {
        return Ok(points.into_iter().map(Site::from).collect());
    }
    let path = cfg.grid.covariates.as_ref().expect("validated");
    let values = read_grid_covariates(path, grid, &aux)?;
    Ok(points.into_iter().zip(values).map(|(p, a)| Site::new(p, a)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub n_obs: usize,
    pub covariates: Vec<String>,
    pub params: CovarianceParams,
    pub beta_hat: Vec<f64>,
    pub estimated: bool,
    pub diagnostics: Option<FitDiagnostics>,
}

pub fn fit_model(cfg: &AnalysisConfig, dataset: Arc<Dataset>) -> Result<(FittedModel, FitReport)> {
    let fc = cfg.fit_config();
    let (model, diagnostics) = if cfg.fit.estimate {
        let r = fit(dataset.clone(), &fc)?;
        (r.model, Some(r.diagnostics))
    } else if fc.ridge {
        (FittedModel::with_ridge(dataset.clone(), fc.initial)?, None)
    } else {
        (FittedModel::new(dataset.clone(), fc.initial)?, None)
    };
    let report = FitReport {
        n_obs: dataset.len(),
        covariates: cfg.model.covariates.clone(),
        params: model.params().clone(),
        beta_hat: model.beta_hat().to_vec(),
        estimated: cfg.fit.estimate,
        diagnostics,
    };
    Ok((model, report))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `fit_report.json`.
pub fn cmd_fit(cfg: &AnalysisConfig) -> Result<FitReport> {
    let dataset = load_dataset(cfg)?;
    let (_, report) = fit_model(cfg, dataset)?;
    create_dir(&cfg.output.dir)?;
    write_json(&cfg.output.dir.join("fit_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassCounts {
    pub confident_exceed: usize,
    pub possible_exceed: usize,
    pub confident_not_exceed: usize,
}

impl ClassCounts {
    pub fn tally(classes: &[RegionClass]) -> Self {
        let mut c = Self::default();
        for class in classes {
            match class {
                RegionClass::ConfidentExceed => c.confident_exceed += 1,
                RegionClass::PossibleExceed => c.possible_exceed += 1,
                RegionClass::ConfidentNotExceed => c.confident_not_exceed += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub direction: Direction,
    pub alpha: f64,
    /// Critical values for the regions in the direction of interest
    /// (`liberal`) and the opposite direction (`conservative`).
    pub c_liberal: f64,
    pub c_liberal_raw: f64,
    pub c_conservative: f64,
    pub c_conservative_raw: f64,
    pub n_empty_liberal: usize,
    pub n_empty_conservative: usize,
    pub counts: ClassCounts,
    pub mask_file: String,
    pub plot_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedSummary {
    pub fit: FitReport,
    pub n_pixels: usize,
    pub samples: usize,
    pub seed: u64,
    pub n_clamped_variances: usize,
    pub thresholds: Vec<ThresholdSummary>,
}

/// Inference for one threshold in the configured direction. For `Below`
/// the problem is mirrored (`-z`, `-u`), so the classes describe
/// exceedance below `u`.
pub fn infer(
    z_hat: &[f64],
    krig_sd: &[f64],
    ensemble: &ConditionalEnsemble,
    negated: Option<&ConditionalEnsemble>,
    u: f64,
    alpha: f64,
    direction: Direction,
) -> Result<Inference> {
    match direction {
        Direction::Above => combine_inferences(z_hat, krig_sd, ensemble, u, alpha),
        Direction::Below => {
            let neg_hat: Vec<f64> = z_hat.iter().map(|v| -v).collect();
            combine_inferences(&neg_hat, krig_sd, negated.expect("negated ensemble"), -u, alpha)
        }
    }
}

fn threshold_tag(u: f64) -> String {
    format!("u{u}")
}

/// Writes `fit_report.json`, per threshold `mask_u<u>.csv` and
/// `regions_u<u>.svg`, and `summary.json`.
pub fn cmd_exceed(cfg: &AnalysisConfig) -> Result<ExceedSummary> {
    let ex = cfg
        .exceedance
        .as_ref()
        .ok_or_else(|| Error::Config("the exceed command needs an [exceedance] section".into()))?;
    let dataset = load_dataset(cfg)?;
    let grid = build_grid(cfg, &dataset)?;
    let sites = grid_sites(cfg, &grid)?;
    let (model, report) = fit_model(cfg, dataset)?;
    let sim = ConditionalSimulator::new(&model, &sites)?;
    let ensemble = sim.ensemble(ex.samples, ex.seed)?;
    let negated = match ex.direction {
        Direction::Below => Some(ConditionalEnsemble::from_values(
            ensemble.n_realizations(),
            ensemble.n_pixels(),
            ensemble.seed(),
            ensemble.values().iter().map(|v| -v).collect(),
        )?),
        Direction::Above => None,
    };

    let out = &cfg.output.dir;
    create_dir(out)?;
    write_json(&out.join("fit_report.json"), &report)?;
    if ex.dump_ensemble {
        ensemble.write_binary(&out.join("ensemble.bin"))?;
    }

    let mut thresholds = Vec::new();
    for &u in &ex.thresholds {
        let inference = infer(
            sim.z_hat(),
            sim.krig_sd(),
            &ensemble,
            negated.as_ref(),
            u,
            ex.alpha,
            ex.direction,
        )?;
        let classes = inference.classes();
        let z_prime: Vec<f64> = match ex.direction {
            Direction::Above => inference.above.z_prime.clone(),
            Direction::Below => inference.above.z_prime.iter().map(|v| -v).collect(),
        };
        let rows: Vec<MaskRow> = grid
            .cells
            .iter()
            .enumerate()
            .map(|(j, c)| MaskRow {
                ix: c.ix,
                iy: c.iy,
                cx: c.center[0],
                cy: c.center[1],
                z_hat: sim.z_hat()[j],
                krig_sd: sim.krig_sd()[j],
                z_prime: z_prime[j],
                region: classes[j],
            })
            .collect();
        let tag = threshold_tag(u);
        let mask_file = format!("mask_{tag}.csv");
        let plot_file = format!("regions_{tag}.svg");
        write_mask_csv(&out.join(&mask_file), &rows)?;
        let word = match ex.direction {
            Direction::Above => "above",
            Direction::Below => "below",
        };
        let title = format!("exceedance {word} u = {u}, confidence {}", 1.0 - ex.alpha);
        emit_plot(&grid, &classes, &title, &out.join(&plot_file))?;
        thresholds.push(ThresholdSummary {
            threshold: u,
            direction: ex.direction,
            alpha: ex.alpha,
            c_liberal: inference.above.c_alpha_hat,
            c_liberal_raw: inference.above.c_alpha_raw,
            c_conservative: inference.below.c_alpha_hat,
            c_conservative_raw: inference.below.c_alpha_raw,
            n_empty_liberal: inference.above.n_empty_realizations,
            n_empty_conservative: inference.below.n_empty_realizations,
            counts: ClassCounts::tally(&classes),
            mask_file,
            plot_file,
        });
    }
    let summary = ExceedSummary {
        fit: report,
        n_pixels: grid.len(),
        samples: ex.samples,
        seed: ex.seed,
        n_clamped_variances: sim.weights().n_clamped,
        thresholds,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimStudyConfig {
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
    #[serde(default)]
    pub output: OutputSection,
}

impl SimStudyConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        resolve(base, &mut cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_toml(path)?;
        output_override(&mut cfg.output.dir, path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::Config("at least one [[experiment]] is required".into()));
        }
        self.experiments.iter().try_for_each(ExperimentConfig::validate)
    }
}

fn write_inclusion_csv(path: &Path, configs: &[ExperimentConfig], results: &[ExperimentResult]) -> Result<()> {
    let mut out = String::from("pattern,phi,rho,nugget,known,level,ix,iy,frequency\n");
    for (cfg, res) in configs.iter().zip(results) {
        let grid = cfg.grid()?;
        for (level, freq) in cfg.levels.iter().zip(&res.inclusion_frequency) {
            for (cell, f) in grid.cells.iter().zip(freq) {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    cfg.pattern.name(),
                    cfg.phi,
                    cfg.rho,
                    cfg.nugget,
                    cfg.covariance_known,
                    level,
                    cell.ix,
                    cell.iy,
                    f
                ));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `coverage.csv` and `inclusion.csv`; fails after writing when an
/// experiment has too many failed replicates.
pub fn cmd_simstudy(cfg: &SimStudyConfig) -> Result<Vec<ExperimentResult>> {
    let results = cfg.experiments.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    let out = &cfg.output.dir;
    create_dir(out)?;
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let path = out.join("coverage.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_coverage_csv(file, &rows)?;
    write_inclusion_csv(&out.join("inclusion.csv"), &cfg.experiments, &results)?;
    results.iter().try_for_each(ExperimentResult::ensure_valid)?;
    Ok(results)
}

/// The machine-readable record printed on failure.
pub fn error_record(e: &Error) -> serde_json::Value {
    serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
[data]
path = "obs.csv"
x = "x"
y = "y"
time = "t"
value = "z"

[model]
covariates = ["intercept", "coord1"]
target_time = 3.0

[model.covariance.spatial]
family = "exponential"
variance = 1.0
range = 0.3

[model.covariance.temporal]
family = "ar1"
rho = 0.5

[model.covariance.nugget.constant]
sigma_eps2 = 0.1

[grid]
kind = "rect"
rect = [0.0, 0.0, 1.0, 1.0]
nx = 4
ny = 3

[exceedance]
thresholds = [0.5, 1.0]
alpha = 0.1
samples = 200
seed = 7

[fit]
estimate = false

[output]
dir = "out"
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = AnalysisConfig::from_toml(CONFIG, Path::new("/base")).unwrap();
        assert_eq!(cfg.data.path, Path::new("/base/obs.csv"));
        assert_eq!(cfg.output.dir, Path::new("/base/out"));
        assert_eq!(cfg.exceedance.as_ref().unwrap().direction, Direction::Above);
        assert!(cfg.aux_names().is_empty());
        assert_eq!(cfg.fit_config().free, FreeParams::none());
    }

    #[test]
    fn rejects_bad_values() {
        let err = AnalysisConfig::from_toml(&CONFIG.replace("alpha = 0.1", "alpha = 1.5"), Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err =
            AnalysisConfig::from_toml(&CONFIG.replace("samples = 200", "samples = 20"), Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("samples"));
        let err =
            AnalysisConfig::from_toml(&CONFIG.replace("nx = 4", "nx = 4\nbogus = 1"), Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = AnalysisConfig::from_toml(
            &CONFIG.replace(r#"["intercept", "coord1"]"#, r#"["intercept", "elevation"]"#),
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.to_string().contains("grid covariate file"));
    }

    #[test]
    fn per_epoch_nugget_from_toml() {
        let text = CONFIG.replace(
            "[model.covariance.nugget.constant]\nsigma_eps2 = 0.1",
            "[model.covariance.nugget.per_epoch.map]\n1 = 0.5\n2 = 0.25",
        );
        let cfg = AnalysisConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.model.covariance.nugget.variance_at(2.0).unwrap(), 0.25);
    }

    #[test]
    fn covariate_builder_reads_aux_columns() {
        let text = CONFIG
            .replace(
                r#"["intercept", "coord1"]"#,
                r#"["intercept", "elevation", "coord2", "slope"]"#,
            )
            .replace("nx = 4", "nx = 4\ncovariates = \"gridcov.csv\"");
        let text = text.replace("value = \"z\"", "value = \"z\"\nelevation = \"elev_m\"");
        let cfg = AnalysisConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(
            cfg.column_mapping().aux,
            vec!["elev_m".to_string(), "slope".to_string()]
        );
        let site = Site::new(crate::covariance::SpaceTimePoint::new(0.2, 0.7, 1.0), vec![100.0, 3.0]);
        assert_eq!(cfg.covariate_builder().eval(&site).unwrap(), vec![1.0, 100.0, 0.7, 3.0]);
    }
}
