//! Universal kriging of the latent process.
//!
//! For a target `x0` with latent cross-covariance `c` to the data,
//! `w = S^-1 c`, `d = x0 - X^T w`, and
//!
//! ```text
//! z_hat    = x0' beta_gls + c' S^-1 (y - X beta_gls)
//! krig_var = sigma0^2 - c' w + d' (X' S^-1 X)^-1 d
//! lambda   = w + S^-1 X (X' S^-1 X)^-1 d
//! ```
//!
//! Cross-covariances never include the nugget: predictions target `Z`,
//! not `Y`.

use std::fmt;
use std::sync::Arc;

use faer::Mat;

use crate::covariance::{build_cov_matrix, cross_cov_vector, CovarianceParams, SpaceTimePoint};
use crate::error::{Error, Result};
use crate::linalg::{factorize, factorize_with_ridge, gls_estimate, SpdFactor, DEFAULT_RIDGE};

/// A space-time location plus auxiliary attributes (elevation, gridded
/// covariates) that covariate builders may read.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub point: SpaceTimePoint,
    pub aux: Vec<f64>,
}

impl Site {
    pub fn new(point: SpaceTimePoint, aux: Vec<f64>) -> Self {
        Self { point, aux }
    }
}

impl From<SpaceTimePoint> for Site {
    fn from(point: SpaceTimePoint) -> Self {
        Self { point, aux: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub site: Site,
    pub value: f64,
}

type CovariateFn = dyn Fn(&Site) -> Vec<f64> + Send + Sync;

/// Deterministic map from a site to its covariate vector `x(s, t)`.
#[derive(Clone)]
pub struct CovariateBuilder {
    names: Vec<String>,
    f: Arc<CovariateFn>,
}

impl fmt::Debug for CovariateBuilder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CovariateBuilder").field("names", &self.names).finish()
    }
}

impl CovariateBuilder {
    pub fn new<F>(names: Vec<String>, f: F) -> Self
    where
        F: Fn(&Site) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { names, f: Arc::new(f) }
    }

    pub fn intercept() -> Self {
        Self::new(vec!["intercept".into()], |_| vec![1.0])
    }

    /// `[1, x, y]`.
    pub fn linear_trend() -> Self {
        Self::new(vec!["intercept".into(), "coord1".into(), "coord2".into()], |s| {
            vec![1.0, s.point.x, s.point.y]
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn eval(&self, site: &Site) -> Result<Vec<f64>> {
        let x = (self.f)(site);
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "covariate builder returned {} values, expected {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "covariate at ({}, {}, {})",
                site.point.x, site.point.y, site.point.t
            )));
        }
        Ok(x)
    }

    /// Design matrix with one row per site.
    pub fn design<'a>(&self, sites: impl ExactSizeIterator<Item = &'a Site>) -> Result<Mat<f64>> {
        let n = sites.len();
        let mut out = Mat::<f64>::zeros(n, self.dim());
        for (i, s) in sites.enumerate() {
            for (j, v) in self.eval(s)?.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Point-referenced observations, their covariate model, and the target time.
#[derive(Debug, Clone)]
pub struct Dataset {
    observations: Vec<Observation>,
    covariates: CovariateBuilder,
    target_time: f64,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>, covariates: CovariateBuilder, target_time: f64) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Data("dataset has no observations".into()));
        }
        if observations.len() < covariates.dim() {
            return Err(Error::Data(format!(
                "{} observations cannot support {} covariates",
                observations.len(),
                covariates.dim()
            )));
        }
        if let Some(i) = observations
            .iter()
            .position(|o| !o.site.point.is_finite() || !o.value.is_finite())
        {
            return Err(Error::NonFinite(format!("observation {i}")));
        }
        if !target_time.is_finite() {
            return Err(Error::NonFinite("target time".into()));
        }
        Ok(Self {
            observations,
            covariates,
            target_time,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn covariates(&self) -> &CovariateBuilder {
        &self.covariates
    }

    pub fn target_time(&self) -> f64 {
        self.target_time
    }

    pub fn points(&self) -> Vec<SpaceTimePoint> {
        self.observations.iter().map(|o| o.site.point).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.value).collect()
    }

    pub fn design_matrix(&self) -> Result<Mat<f64>> {
        self.covariates.design(self.observations.iter().map(|o| &o.site))
    }

    /// Same observations with every value replaced by `f(value)`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let observations = self
            .observations
            .iter()
            .map(|o| Observation {
                site: o.site.clone(),
                value: f(o.value),
            })
            .collect();
        Self::new(observations, self.covariates.clone(), self.target_time)
    }
}

/// Plug-in universal kriging model at fixed covariance parameters.
#[derive(Debug, Clone)]
pub struct FittedModel {
    dataset: Arc<Dataset>,
    params: CovarianceParams,
    beta_hat: Vec<f64>,
    sigma_factor: SpdFactor,
    beta_cov_factor: SpdFactor,
    points: Vec<SpaceTimePoint>,
    values: Vec<f64>,
    nugget_at_obs: Vec<f64>,
    design: Mat<f64>,
    /// `S^-1 X`
    sigma_inv_design: Mat<f64>,
    /// `S^-1 (y - X beta)`
    resid_weights: Vec<f64>,
}

impl FittedModel {
    pub fn new(dataset: Arc<Dataset>, params: CovarianceParams) -> Result<Self> {
        Self::build(dataset, params, false)
    }

    /// As [`FittedModel::new`], adding the default ridge to `Sigma_y`.
    pub fn with_ridge(dataset: Arc<Dataset>, params: CovarianceParams) -> Result<Self> {
        Self::build(dataset, params, true)
    }

    fn build(dataset: Arc<Dataset>, params: CovarianceParams, ridge: bool) -> Result<Self> {
        params.validate()?;
        let points = dataset.points();
        let values = dataset.values();
        let sigma = build_cov_matrix(&points, &params, true)?;
        let sigma_factor = if ridge {
            factorize_with_ridge(&sigma, DEFAULT_RIDGE)?
        } else {
            factorize(&sigma)?
        };
        let design = dataset.design_matrix()?;
        let gls = gls_estimate(&design, &sigma_factor, &values)?;
        let sigma_inv_design = sigma_factor.solve(&design)?;
        let resid: Vec<f64> = (0..values.len())
            .map(|i| values[i] - (0..design.ncols()).map(|j| design[(i, j)] * gls.beta[j]).sum::<f64>())
            .collect();
        let resid_weights = sigma_factor.solve_vec(&resid)?;
        let nugget_at_obs = points
            .iter()
            .map(|p| params.nugget.variance_at(p.t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dataset,
            params,
            beta_hat: gls.beta,
            sigma_factor,
            beta_cov_factor: gls.cov_factor,
            points,
            values,
            nugget_at_obs,
            design,
            sigma_inv_design,
            resid_weights,
        })
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn params(&self) -> &CovarianceParams {
        &self.params
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn sigma_factor(&self) -> &SpdFactor {
        &self.sigma_factor
    }

    pub fn beta_cov_factor(&self) -> &SpdFactor {
        &self.beta_cov_factor
    }

    pub fn n_obs(&self) -> usize {
        self.points.len()
    }

    pub fn design(&self) -> &Mat<f64> {
        &self.design
    }

    /// Index of an observation sharing `point` exactly and carrying no
    /// nugget; the latent value there is known.
    pub fn exact_data_site(&self, point: &SpaceTimePoint) -> Option<usize> {
        self.points
            .iter()
            .zip(&self.nugget_at_obs)
            .position(|(p, &nug)| nug == 0.0 && p.coincides(point))
    }

    fn column(&self, site: &Site) -> Result<KrigingColumn> {
        if !site.point.is_finite() {
            return Err(Error::NonFinite("prediction point".into()));
        }
        let x0 = self.dataset.covariates().eval(site)?;
        let n = self.n_obs();
        let k = x0.len();
        if let Some(i) = self.exact_data_site(&site.point) {
            let mut lambda = vec![0.0; n];
            lambda[i] = 1.0;
            return Ok(KrigingColumn {
                lambda,
                z_hat: self.values[i],
                krig_var: 0.0,
                clamped: false,
            });
        }
        let c = cross_cov_vector(&site.point, &self.points, &self.params)?;
        let w = self.sigma_factor.solve_vec(&c)?;
        let d: Vec<f64> = (0..k)
            .map(|j| x0[j] - (0..n).map(|i| self.design[(i, j)] * w[i]).sum::<f64>())
            .collect();
        let e = self.beta_cov_factor.solve_vec(&d)?;
        let lambda: Vec<f64> = (0..n)
            .map(|i| w[i] + (0..k).map(|j| self.sigma_inv_design[(i, j)] * e[j]).sum::<f64>())
            .collect();
        let trend: f64 = x0.iter().zip(&self.beta_hat).map(|(a, b)| a * b).sum();
        let z_hat = trend + c.iter().zip(&self.resid_weights).map(|(a, b)| a * b).sum::<f64>();
        let sigma0 = self.params.spatial.variance();
        let raw = sigma0 - c.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            + d.iter().zip(&e).map(|(a, b)| a * b).sum::<f64>();
        let (krig_var, clamped) = if raw < 0.0 { (0.0, true) } else { (raw, false) };
        Ok(KrigingColumn {
            lambda,
            z_hat,
            krig_var,
            clamped,
        })
    }
}

struct KrigingColumn {
    lambda: Vec<f64>,
    z_hat: f64,
    krig_var: f64,
    clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub z_hat: f64,
    pub krig_var: f64,
    /// The raw kriging variance came out negative and was set to zero.
    pub clamped: bool,
}

impl Prediction {
    pub fn krig_sd(&self) -> f64 {
        self.krig_var.sqrt()
    }
}

/// Universal kriging prediction of the latent process at `site`.
pub fn uk_predict(model: &FittedModel, site: &Site) -> Result<Prediction> {
    let col = model.column(site)?;
    Ok(Prediction {
        z_hat: col.z_hat,
        krig_var: col.krig_var,
        clamped: col.clamped,
    })
}

/// Batched kriging weights and predictions.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    /// `n x m`; column `j` holds the weights for target `j`.
    pub lambda: Mat<f64>,
    pub z_hat: Vec<f64>,
    pub krig_var: Vec<f64>,
    pub krig_sd: Vec<f64>,
    /// Number of targets whose variance was clamped at zero.
    pub n_clamped: usize,
}

/// Kriging weights for every target. Each column is computed on its own,
/// so results do not depend on how targets are batched.
pub fn uk_weight_matrix(model: &FittedModel, sites: &[Site]) -> Result<WeightMatrix> {
    if sites.is_empty() {
        return Err(Error::DimensionMismatch("no prediction targets".into()));
    }
    let n = model.n_obs();
    let m = sites.len();
    let mut lambda = Mat::<f64>::zeros(n, m);
    let mut z_hat = Vec::with_capacity(m);
    let mut krig_var = Vec::with_capacity(m);
    let mut n_clamped = 0;
    for (j, site) in sites.iter().enumerate() {
        let col = model.column(site)?;
        lambda.col_as_slice_mut(j).copy_from_slice(&col.lambda);
        z_hat.push(col.z_hat);
        krig_var.push(col.krig_var);
        n_clamped += usize::from(col.clamped);
    }
    let krig_sd = krig_var.iter().map(|v| v.sqrt()).collect();
    Ok(WeightMatrix {
        lambda,
        z_hat,
        krig_var,
        krig_sd,
        n_clamped,
    })
}
