//! Separable spatio-temporal covariance models.
//!
//! The latent process covariance is `C_S(h) * rho^|dt|`. Observed responses
//! additionally carry a nugget (measurement-error variance) on pairs that
//! share the same location and the same time.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_k, gamma};

/// A location in the plane observed at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn distance(&self, other: &SpaceTimePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }

    /// Exact coordinate coincidence in space and time.
    pub fn coincides(&self, other: &SpaceTimePoint) -> bool {
        self.x == other.x && self.y == other.y && self.t == other.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpatialCovKind {
    Exponential { variance: f64, range: f64 },
    Matern { variance: f64, range: f64, smoothness: f64 },
}

impl SpatialCovKind {
    pub fn variance(&self) -> f64 {
        match *self {
            SpatialCovKind::Exponential { variance, .. } | SpatialCovKind::Matern { variance, .. } => variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (variance, range, smoothness) = match *self {
            SpatialCovKind::Exponential { variance, range } => (variance, range, 1.0),
            SpatialCovKind::Matern {
                variance,
                range,
                smoothness,
            } => (variance, range, smoothness),
        };
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "spatial variance must be > 0, got {variance}"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "spatial range must be > 0, got {range}"
            )));
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "smoothness must be > 0, got {smoothness}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TemporalCovKind {
    Ar1 { rho: f64 },
}

impl TemporalCovKind {
    pub fn validate(&self) -> Result<()> {
        let TemporalCovKind::Ar1 { rho } = *self;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "AR(1) rho must lie in (0, 1), got {rho}"
            )));
        }
        Ok(())
    }
}

/// Measurement-error variance, constant or keyed by integer epoch label
/// (the time coordinate rounded to the nearest integer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuggetSpec {
    Constant {
        sigma_eps2: f64,
    },
    PerEpoch {
        #[serde(with = "epoch_keys")]
        map: BTreeMap<i64, f64>,
    },
}

/// Epoch maps use string keys on the wire, so they survive formats whose
/// keys must be strings.
mod epoch_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<i64, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<i64, f64>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i64>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("epoch label '{k}' is not an integer")))
            })
            .collect()
    }
}

impl NuggetSpec {
    pub fn zero() -> Self {
        NuggetSpec::Constant { sigma_eps2: 0.0 }
    }

    pub fn epoch_label(t: f64) -> i64 {
        t.round() as i64
    }

    /// Nugget variance that applies at time `t`.
    pub fn variance_at(&self, t: f64) -> Result<f64> {
        match self {
            NuggetSpec::Constant { sigma_eps2 } => Ok(*sigma_eps2),
            NuggetSpec::PerEpoch { map } => map.get(&Self::epoch_label(t)).copied().ok_or_else(|| {
                Error::ParameterDomain(format!("no nugget variance for epoch {}", Self::epoch_label(t)))
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        let bad = match self {
            NuggetSpec::Constant { sigma_eps2 } => (!ok(*sigma_eps2)).then_some(*sigma_eps2),
            NuggetSpec::PerEpoch { map } => map.values().copied().find(|v| !ok(*v)),
        };
        match bad {
            Some(v) => Err(Error::ParameterDomain(format!("nugget variance must be >= 0, got {v}"))),
            None => Ok(()),
        }
    }
}

/// The indicator `v_eps`: one for identical location and time, else zero.
pub fn nugget_indicator(p1: &SpaceTimePoint, p2: &SpaceTimePoint) -> bool {
    p1.coincides(p2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    pub spatial: SpatialCovKind,
    pub temporal: TemporalCovKind,
    pub nugget: NuggetSpec,
}

impl CovarianceParams {
    pub fn new(spatial: SpatialCovKind, temporal: TemporalCovKind, nugget: NuggetSpec) -> Result<Self> {
        let params = Self {
            spatial,
            temporal,
            nugget,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        self.temporal.validate()?;
        self.nugget.validate()
    }
}

/// Matérn covariance evaluated through the Bessel function, with no
/// half-integer shortcuts.
pub fn matern_bessel(h: f64, variance: f64, range: f64, smoothness: f64) -> f64 {
    if h == 0.0 {
        return variance;
    }
    let r = h / range;
    let value =
        variance * 2f64.powf(1.0 - smoothness) * r.powf(smoothness) * bessel_k(smoothness, r) / gamma(smoothness);
    if value.is_finite() {
        value.min(variance)
    } else {
        // r so small that K_nu overflows: the limit at zero lag applies
        variance
    }
}

fn matern(h: f64, variance: f64, range: f64, smoothness: f64) -> f64 {
    let r = h / range;
    if smoothness == 0.5 {
        variance * (-r).exp()
    } else if smoothness == 1.5 {
        variance * (1.0 + r) * (-r).exp()
    } else if smoothness == 2.5 {
        variance * (1.0 + r + r * r / 3.0) * (-r).exp()
    } else {
        matern_bessel(h, variance, range, smoothness)
    }
}

#[inline]
fn spatial_cov_unchecked(h: f64, kind: &SpatialCovKind) -> f64 {
    match *kind {
        SpatialCovKind::Exponential { variance, range } => variance * (-h / range).exp(),
        SpatialCovKind::Matern {
            variance,
            range,
            smoothness,
        } => matern(h, variance, range, smoothness),
    }
}

#[inline]
fn temporal_cov_unchecked(dt: f64, kind: &TemporalCovKind) -> f64 {
    let TemporalCovKind::Ar1 { rho } = *kind;
    if dt == 0.0 {
        1.0
    } else {
        rho.powf(dt.abs())
    }
}

/// Spatial covariance at distance `h`.
pub fn spatial_cov(h: f64, kind: &SpatialCovKind) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::NonFinite(format!("distance {h}")));
    }
    if h < 0.0 {
        return Err(Error::ParameterDomain(format!("distance must be >= 0, got {h}")));
    }
    kind.validate()?;
    Ok(spatial_cov_unchecked(h, kind))
}

/// AR(1) temporal correlation `rho^|dt|`.
pub fn temporal_cov(dt: f64, kind: &TemporalCovKind) -> Result<f64> {
    if !dt.is_finite() {
        return Err(Error::NonFinite(format!("time lag {dt}")));
    }
    kind.validate()?;
    Ok(temporal_cov_unchecked(dt, kind))
}

#[inline]
fn st_cov_unchecked(
    p1: &SpaceTimePoint,
    p2: &SpaceTimePoint,
    params: &CovarianceParams,
    include_nugget: bool,
) -> Result<f64> {
    let latent =
        spatial_cov_unchecked(p1.distance(p2), &params.spatial) * temporal_cov_unchecked(p1.t - p2.t, &params.temporal);
    if include_nugget && nugget_indicator(p1, p2) {
        Ok(latent + params.nugget.variance_at(p1.t)?)
    } else {
        Ok(latent)
    }
}

/// Covariance between two space-time points. The nugget enters only when
/// `include_nugget` is set and the points coincide.
pub fn st_cov(
    p1: &SpaceTimePoint,
    p2: &SpaceTimePoint,
    params: &CovarianceParams,
    include_nugget: bool,
) -> Result<f64> {
    if !p1.is_finite() || !p2.is_finite() {
        return Err(Error::NonFinite("space-time coordinate".into()));
    }
    params.spatial.validate()?;
    params.temporal.validate()?;
    st_cov_unchecked(p1, p2, params, include_nugget)
}

/// Symmetric covariance matrix over `points`.
pub fn build_cov_matrix(
    points: &[SpaceTimePoint],
    params: &CovarianceParams,
    include_nugget: bool,
) -> Result<Mat<f64>> {
    if points.is_empty() {
        return Err(Error::DimensionMismatch(
            "covariance matrix needs at least one point".into(),
        ));
    }
    check_points(points)?;
    params.validate()?;
    let n = points.len();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = st_cov_unchecked(&points[i], &points[j], params, include_nugget)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Latent cross-covariance matrix with `rows.len()` rows and `cols.len()`
/// columns; never includes the nugget.
pub fn build_cross_cov(
    rows: &[SpaceTimePoint],
    cols: &[SpaceTimePoint],
    params: &CovarianceParams,
) -> Result<Mat<f64>> {
    check_points(rows)?;
    check_points(cols)?;
    params.validate()?;
    let mut out = Mat::<f64>::zeros(rows.len(), cols.len());
    for (j, pc) in cols.iter().enumerate() {
        for (i, pr) in rows.iter().enumerate() {
            out[(i, j)] = st_cov_unchecked(pr, pc, params, false)?;
        }
    }
    Ok(out)
}

/// Latent covariance vector between `point` and each of `points`.
pub fn cross_cov_vector(
    point: &SpaceTimePoint,
    points: &[SpaceTimePoint],
    params: &CovarianceParams,
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|p| st_cov_unchecked(point, p, params, false))
        .collect()
}

fn check_points(points: &[SpaceTimePoint]) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("coordinates of point {i}"))),
        None => Ok(()),
    }
}
