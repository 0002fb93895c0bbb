//! Restricted maximum likelihood for the covariance parameters.
//!
//! The objective is minimized with a Nelder-Mead simplex over transformed
//! parameters: logs of variances, ranges and smoothness, logit of the AR(1)
//! coefficient. A box in the natural scale is enforced as an infinite
//! barrier, as is any parameter value whose covariance fails to factorize.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    build_cov_matrix, CovarianceParams, NuggetSpec, SpaceTimePoint, SpatialCovKind, TemporalCovKind,
};
use crate::error::{Error, Result};
use crate::kriging::{Dataset, FittedModel};
use crate::linalg::{factorize, factorize_with_ridge, SpdFactor, DEFAULT_RIDGE};

/// Which parameters the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeParams {
    pub variance: bool,
    pub range: bool,
    /// Ignored for the exponential family.
    pub smoothness: bool,
    pub rho: bool,
    /// Every nugget variance (each epoch for a per-epoch nugget).
    pub nugget: bool,
}

impl Default for FreeParams {
    fn default() -> Self {
        Self::all()
    }
}

impl FreeParams {
    pub fn all() -> Self {
        Self {
            variance: true,
            range: true,
            smoothness: true,
            rho: true,
            nugget: true,
        }
    }

    pub fn none() -> Self {
        Self {
            variance: false,
            range: false,
            smoothness: false,
            rho: false,
            nugget: false,
        }
    }
}

/// Closed intervals in the natural parameter scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub variance: (f64, f64),
    pub range: (f64, f64),
    pub smoothness: (f64, f64),
    pub rho: (f64, f64),
    pub nugget: (f64, f64),
}

impl Bounds {
    /// Variances within `[1e-6, 1e3]` times the sample variance of the
    /// response, ranges within `[1e-4, 1e3]` times the largest distance
    /// between sites.
    pub fn from_data(dataset: &Dataset) -> Self {
        let v = sample_variance(&dataset.values()).max(f64::MIN_POSITIVE);
        let d = max_site_distance(&dataset.points()).max(f64::MIN_POSITIVE);
        Self {
            variance: (1e-6 * v, 1e3 * v),
            range: (1e-4 * d, 1e3 * d),
            smoothness: (0.05, 5.0),
            rho: (1e-4, 1.0 - 1e-4),
            nugget: (1e-6 * v, 1e3 * v),
        }
    }
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Largest planar distance between any two observations.
pub fn max_site_distance(points: &[SpaceTimePoint]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(p.distance(q));
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Starting values; parameters that are not free stay at these values.
    pub initial: CovarianceParams,
    pub free: FreeParams,
    /// Defaults to [`Bounds::from_data`].
    pub bounds: Option<Bounds>,
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Add the default ridge to `Sigma_y` in every factorization.
    pub ridge: bool,
    /// Three starts from jittered initial values, keeping the best.
    pub multi_start: bool,
}

impl FitConfig {
    pub fn new(initial: CovarianceParams) -> Self {
        Self {
            initial,
            free: FreeParams::all(),
            bounds: None,
            max_evals: 2000,
            x_tol: 1e-6,
            f_tol: 1e-8,
            ridge: false,
            multi_start: false,
        }
    }

    pub fn fixed(initial: CovarianceParams) -> Self {
        Self {
            free: FreeParams::none(),
            ..Self::new(initial)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        if self.max_evals == 0 {
            return Err(Error::Config("max_evals must be >= 1".into()));
        }
        if !(self.x_tol > 0.0 && self.f_tol > 0.0) {
            return Err(Error::Config("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

/// The REML objective for one dataset, with data-dependent pieces cached.
#[derive(Debug, Clone)]
pub struct RemlObjective {
    points: Vec<SpaceTimePoint>,
    y: Vec<f64>,
    x: Mat<f64>,
    ridge: bool,
}

impl RemlObjective {
    pub fn new(dataset: &Dataset, ridge: bool) -> Result<Self> {
        let x = dataset.design_matrix()?;
        if x.ncols() >= dataset.len() {
            return Err(Error::DimensionMismatch(format!(
                "REML needs more observations ({}) than covariates ({})",
                dataset.len(),
                x.ncols()
            )));
        }
        Ok(Self {
            points: dataset.points(),
            y: dataset.values(),
            x,
            ridge,
        })
    }

    fn factor(&self, params: &CovarianceParams) -> Result<SpdFactor> {
        let sigma = build_cov_matrix(&self.points, params, true)?;
        if self.ridge {
            factorize_with_ridge(&sigma, DEFAULT_RIDGE)
        } else {
            factorize(&sigma)
        }
    }

    /// `(log|S| + log|X'S^-1X| + y'Py) / 2`; `+inf` when either matrix is
    /// not positive definite.
    pub fn value(&self, params: &CovarianceParams) -> Result<f64> {
        let sigma = match self.factor(params) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let mut xw = self.x.clone();
        sigma.whiten_in_place(&mut xw)?;
        let yw = sigma.whiten_vec(&self.y)?;
        let k = xw.ncols();
        let mut info = Mat::<f64>::zeros(k, k);
        matmul(&mut info, Accum::Replace, xw.transpose(), &xw, 1.0, Par::Seq);
        let info_factor = match factorize(&info) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        let b: Vec<f64> = (0..k)
            .map(|j| xw.col_as_slice(j).iter().zip(&yw).map(|(a, c)| a * c).sum())
            .collect();
        let quad = yw.iter().map(|v| v * v).sum::<f64>() - info_factor.quad_form(&b)?;
        let value = 0.5 * (sigma.log_det() + info_factor.log_det() + quad);
        Ok(if value.is_finite() { value } else { f64::INFINITY })
    }
}

/// REML negative log-likelihood up to an additive constant.
pub fn reml_nll(theta: &CovarianceParams, dataset: &Dataset) -> Result<f64> {
    theta.validate()?;
    RemlObjective::new(dataset, false)?.value(theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Variance,
    Range,
    Smoothness,
    Rho,
    NuggetConstant,
    NuggetEpoch(i64),
}

/// Maps between the optimizer's unconstrained vector and parameters.
#[derive(Debug, Clone)]
struct Parameterization {
    base: CovarianceParams,
    slots: Vec<Slot>,
    bounds: Bounds,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn inv_logit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Parameterization {
    fn new(config: &FitConfig, bounds: Bounds) -> Self {
        let free = config.free;
        let mut slots = Vec::new();
        if free.variance {
            slots.push(Slot::Variance);
        }
        if free.range {
            slots.push(Slot::Range);
        }
        if free.smoothness && matches!(config.initial.spatial, SpatialCovKind::Matern { .. }) {
            slots.push(Slot::Smoothness);
        }
        if free.rho {
            slots.push(Slot::Rho);
        }
        if free.nugget {
            match &config.initial.nugget {
                NuggetSpec::Constant { .. } => slots.push(Slot::NuggetConstant),
                NuggetSpec::PerEpoch { map } => slots.extend(map.keys().map(|&k| Slot::NuggetEpoch(k))),
            }
        }
        Self {
            base: config.initial.clone(),
            slots,
            bounds,
        }
    }

    fn bounds_of(&self, slot: Slot) -> (f64, f64) {
        match slot {
            Slot::Variance => self.bounds.variance,
            Slot::Range => self.bounds.range,
            Slot::Smoothness => self.bounds.smoothness,
            Slot::Rho => self.bounds.rho,
            Slot::NuggetConstant | Slot::NuggetEpoch(_) => self.bounds.nugget,
        }
    }

    fn natural(&self, params: &CovarianceParams, slot: Slot) -> f64 {
        match (slot, &params.spatial, &params.temporal, &params.nugget) {
            (Slot::Variance, s, _, _) => s.variance(),
            (Slot::Range, SpatialCovKind::Exponential { range, .. } | SpatialCovKind::Matern { range, .. }, _, _) => {
                *range
            }
            (Slot::Smoothness, SpatialCovKind::Matern { smoothness, .. }, _, _) => *smoothness,
            (Slot::Rho, _, TemporalCovKind::Ar1 { rho }, _) => *rho,
            (Slot::NuggetConstant, _, _, NuggetSpec::Constant { sigma_eps2 }) => *sigma_eps2,
            (Slot::NuggetEpoch(k), _, _, NuggetSpec::PerEpoch { map }) => map[&k],
            _ => unreachable!("slot does not match the model"),
        }
    }

    /// Starting vector, with values clamped into the box.
    fn encode(&self, params: &CovarianceParams) -> Vec<f64> {
        self.slots
            .iter()
            .map(|&slot| {
                let (lo, hi) = self.bounds_of(slot);
                let v = self.natural(params, slot).clamp(lo, hi);
                match slot {
                    Slot::Rho => logit(v),
                    _ => v.ln(),
                }
            })
            .collect()
    }

    /// `None` outside the box.
    fn decode(&self, x: &[f64]) -> Option<CovarianceParams> {
        let mut p = self.base.clone();
        for (&slot, &xi) in self.slots.iter().zip(x) {
            let v = match slot {
                Slot::Rho => inv_logit(xi),
                _ => xi.exp(),
            };
            let (lo, hi) = self.bounds_of(slot);
            if !(v >= lo && v <= hi) {
                return None;
            }
            match (slot, &mut p.spatial, &mut p.temporal, &mut p.nugget) {
                (
                    Slot::Variance,
                    SpatialCovKind::Exponential { variance, .. } | SpatialCovKind::Matern { variance, .. },
                    _,
                    _,
                ) => *variance = v,
                (
                    Slot::Range,
                    SpatialCovKind::Exponential { range, .. } | SpatialCovKind::Matern { range, .. },
                    _,
                    _,
                ) => *range = v,
                (Slot::Smoothness, SpatialCovKind::Matern { smoothness, .. }, _, _) => *smoothness = v,
                (Slot::Rho, _, TemporalCovKind::Ar1 { rho }, _) => *rho = v,
                (Slot::NuggetConstant, _, _, NuggetSpec::Constant { sigma_eps2 }) => *sigma_eps2 = v,
                (Slot::NuggetEpoch(k), _, _, NuggetSpec::PerEpoch { map }) => {
                    map.insert(k, v);
                }
                _ => unreachable!("slot does not match the model"),
            }
        }
        Some(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Largest coordinate distance from the best vertex at termination.
    pub simplex_size: f64,
    pub converged: bool,
}

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2, shrink 1/2.
/// Converged when every vertex lies within `x_tol` of the best in each
/// coordinate and every vertex value lies within `f_tol` of the best.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: NelderMeadOptions) -> NelderMeadOutcome {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NelderMeadOutcome {
            x: Vec::new(),
            f: v,
            evals,
            simplex_size: 0.0,
            converged: true,
        };
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let size_of = |simplex: &[Vec<f64>]| {
        simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let size = size_of(&simplex);
        let spread = values[n] - values[0];
        let converged = size <= opts.x_tol && spread <= opts.f_tol;
        if converged || evals >= opts.max_evals {
            return NelderMeadOutcome {
                x: simplex[0].clone(),
                f: values[0],
                evals,
                simplex_size: size,
                converged,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            let ok = fc < values[n];
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = (0..n)
                .map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]))
                .collect();
            values[i] = eval(&shrunk, &mut evals);
            simplex[i] = shrunk;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub evals: usize,
    pub simplex_size: f64,
    pub converged: bool,
    /// Objective at the returned parameters.
    pub reml_nll: f64,
    /// Evaluations rejected by the box or a failed factorization.
    pub barrier_hits: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FittedModel,
    pub diagnostics: FitDiagnostics,
}

const INITIAL_STEP: f64 = 0.5;

/// REML fit followed by the plug-in GLS model at the estimate.
pub fn fit(dataset: Arc<Dataset>, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let objective = RemlObjective::new(&dataset, config.ridge)?;
    let bounds = config.bounds.unwrap_or_else(|| Bounds::from_data(&dataset));
    let param = Parameterization::new(config, bounds);
    let x0 = param.encode(&config.initial);

    let mut barrier_hits = 0usize;
    let mut failure: Option<Error> = None;
    let mut f = |x: &[f64]| -> f64 {
        let Some(p) = param.decode(x) else {
            barrier_hits += 1;
            return f64::INFINITY;
        };
        match objective.value(&p) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => {
                barrier_hits += 1;
                f64::INFINITY
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };

    let mut starts = vec![x0.clone()];
    if config.multi_start {
        for s in [1.0, -1.0] {
            starts.push(
                x0.iter()
                    .enumerate()
                    .map(|(i, v)| v + if i % 2 == 0 { s } else { -s } * INITIAL_STEP)
                    .collect(),
            );
        }
    }

    let mut total_evals = 0;
    let mut best: Option<NelderMeadOutcome> = None;
    for start in starts {
        let mut outcome = minimize_with_restarts(&mut f, &start, config, &mut total_evals);
        outcome.evals = total_evals;
        if best.as_ref().is_none_or(|b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");
    if let Some(e) = failure {
        return Err(e);
    }
    let theta = param.decode(&best.x).unwrap_or_else(|| config.initial.clone());
    if !best.converged || !best.f.is_finite() {
        return Err(Error::NonConvergence {
            evals: total_evals,
            best: Box::new(theta),
            best_value: best.f,
        });
    }
    let model = if config.ridge {
        FittedModel::with_ridge(dataset, theta)?
    } else {
        FittedModel::new(dataset, theta)?
    };
    Ok(FitResult {
        model,
        diagnostics: FitDiagnostics {
            evals: total_evals,
            simplex_size: best.simplex_size,
            converged: best.converged,
            reml_nll: best.f,
            barrier_hits,
        },
    })
}

/// Runs the simplex, restarting from the best vertex until a restart no
/// longer improves the objective by more than `f_tol`.
fn minimize_with_restarts(
    f: &mut impl FnMut(&[f64]) -> f64,
    start: &[f64],
    config: &FitConfig,
    total_evals: &mut usize,
) -> NelderMeadOutcome {
    let opts = |used: usize| NelderMeadOptions {
        max_evals: config.max_evals.saturating_sub(used).max(1),
        x_tol: config.x_tol,
        f_tol: config.f_tol,
        step: INITIAL_STEP,
    };
    let mut outcome = nelder_mead(&mut *f, start, opts(*total_evals));
    *total_evals += outcome.evals;
    while outcome.converged && !start.is_empty() && *total_evals < config.max_evals {
        let again = nelder_mead(
            &mut *f,
            &outcome.x,
            NelderMeadOptions {
                step: 10.0 * config.x_tol.max(1e-4),
                ..opts(*total_evals)
            },
        );
        *total_evals += again.evals;
        if again.f < outcome.f - config.f_tol {
            outcome = again;
        } else {
            break;
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::{CovariateBuilder, Observation};
    use crate::linalg::RngStream;

    fn iid_dataset(values: &[f64]) -> Arc<Dataset> {
        let obs = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Observation {
                site: SpaceTimePoint::new(1000.0 * i as f64, 0.0, 1.0).into(),
                value: v,
            })
            .collect();
        Arc::new(Dataset::new(obs, CovariateBuilder::intercept(), 1.0).unwrap())
    }

    fn iid_params(variance: f64) -> CovarianceParams {
        CovarianceParams::new(
            SpatialCovKind::Exponential { variance, range: 1e-3 },
            TemporalCovKind::Ar1 { rho: 0.5 },
            NuggetSpec::zero(),
        )
        .unwrap()
    }

    fn variance_only(initial: CovarianceParams) -> FitConfig {
        FitConfig {
            free: FreeParams {
                variance: true,
                ..FreeParams::none()
            },
            ..FitConfig::new(initial)
        }
    }

    #[test]
    fn nelder_mead_quadratic() {
        let out = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            NelderMeadOptions {
                max_evals: 2000,
                x_tol: 1e-8,
                f_tol: 1e-12,
                step: 0.5,
            },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn two_iid_observations_give_the_sample_variance() {
        let ds = iid_dataset(&[1.3, -0.4]);
        // sum of squared deviations over n - 1 = 1
        let expected = (1.3f64 - 0.45).powi(2) + (-0.4f64 - 0.45).powi(2);
        let result = fit(ds, &variance_only(iid_params(1.0))).unwrap();
        let est = result.model.params().spatial.variance();
        assert!((est - expected).abs() / expected < 1e-5, "{est} vs {expected}");
        assert!(result.diagnostics.converged);
    }

    #[test]
    fn scaling_data_scales_variance() {
        let y = [0.3, -1.2, 0.8, 2.1, -0.5];
        let a = fit(iid_dataset(&y), &variance_only(iid_params(1.0))).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let b = fit(iid_dataset(&y2), &variance_only(iid_params(1.0))).unwrap();
        let (va, vb) = (a.model.params().spatial.variance(), b.model.params().spatial.variance());
        assert!((vb / va - 4.0).abs() < 1e-4, "{va} {vb}");
    }

    fn random_dataset(seed: u64, n_sites: usize) -> Arc<Dataset> {
        let mut rng = RngStream::new(seed);
        let obs = (0..n_sites)
            .flat_map(|_| {
                let (x, y) = (rng.uniform(), rng.uniform());
                let v: Vec<f64> = (0..2).map(|_| rng.standard_normal()).collect();
                (0..2).map(move |t| Observation {
                    site: SpaceTimePoint::new(x, y, (t + 1) as f64).into(),
                    value: v[t] + x,
                })
            })
            .collect();
        Arc::new(Dataset::new(obs, CovariateBuilder::linear_trend(), 3.0).unwrap())
    }

    fn some_params() -> CovarianceParams {
        CovarianceParams::new(
            SpatialCovKind::Matern {
                variance: 1.3,
                range: 0.4,
                smoothness: 0.8,
            },
            TemporalCovKind::Ar1 { rho: 0.4 },
            NuggetSpec::Constant { sigma_eps2: 0.2 },
        )
        .unwrap()
    }

    #[test]
    fn translation_invariance_with_intercept() {
        let ds = random_dataset(3, 6);
        let shifted = ds.map_values(|v| v + 17.5).unwrap();
        let a = reml_nll(&some_params(), &ds).unwrap();
        let b = reml_nll(&some_params(), &shifted).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn fixed_config_returns_supplied_theta() {
        let ds = random_dataset(4, 5);
        let result = fit(ds.clone(), &FitConfig::fixed(some_params())).unwrap();
        assert_eq!(result.model.params(), &some_params());
        let direct = FittedModel::new(ds, some_params()).unwrap();
        assert_eq!(result.model.beta_hat(), direct.beta_hat());
        assert_eq!(result.diagnostics.evals, 1);
    }

    #[test]
    fn fit_is_deterministic_and_decreases_objective() {
        let ds = random_dataset(5, 15);
        let initial = CovarianceParams {
            spatial: SpatialCovKind::Exponential {
                variance: 1.0,
                range: 0.3,
            },
            ..some_params()
        };
        let cfg = FitConfig::new(initial.clone());
        let a = fit(ds.clone(), &cfg).unwrap();
        let b = fit(ds.clone(), &cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        let start = reml_nll(&initial, &ds).unwrap();
        assert!(a.diagnostics.reml_nll <= start);
    }

    #[test]
    fn nonconvergence_carries_best_theta() {
        let ds = random_dataset(6, 8);
        let cfg = FitConfig {
            max_evals: 5,
            ..FitConfig::new(some_params())
        };
        match fit(ds, &cfg) {
            Err(Error::NonConvergence { evals, best_value, .. }) => {
                assert!(evals >= 5);
                assert!(best_value.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
