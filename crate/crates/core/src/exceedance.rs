//! Test-statistic fields, critical values from a conditional ensemble, and
//! the confidence regions for exceedance above and below a threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condsim::ConditionalEnsemble;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Above => Direction::Below,
            Direction::Below => Direction::Above,
        }
    }
}

/// Pixel classification for one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    /// Inside the complement of the below-threshold region.
    ConfidentExceed,
    /// Inside the above-threshold confidence region but not confidently exceeding.
    PossibleExceed,
    ConfidentNotExceed,
}

impl RegionClass {
    pub const ALL: [RegionClass; 3] = [
        RegionClass::ConfidentExceed,
        RegionClass::PossibleExceed,
        RegionClass::ConfidentNotExceed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionClass::ConfidentExceed => "confident_exceed",
            RegionClass::PossibleExceed => "possible_exceed",
            RegionClass::ConfidentNotExceed => "confident_not_exceed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl std::fmt::Display for RegionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceReport {
    pub threshold: f64,
    pub alpha: f64,
    pub direction: Direction,
    pub z_prime: Vec<f64>,
    /// Critical value used to build `region_mask`.
    pub c_alpha_hat: f64,
    /// Critical value as estimated, before any adjustment for nesting.
    pub c_alpha_raw: f64,
    pub region_mask: Vec<bool>,
    /// Complement of the opposite-direction region.
    pub complement_mask: Vec<bool>,
    pub n_empty_realizations: usize,
    pub n_realizations: usize,
}

/// `(z_hat - u) / sd`; pixels with zero sd get `+inf`, `-inf` or `0`
/// according to the sign of `z_hat - u`.
pub fn test_statistic_field(z_hat: &[f64], krig_sd: &[f64], u: f64) -> Result<Vec<f64>> {
    if z_hat.len() != krig_sd.len() {
        return Err(Error::DimensionMismatch(format!(
            "z_hat has {} entries, krig_sd {}",
            z_hat.len(),
            krig_sd.len()
        )));
    }
    if u.is_nan() {
        return Err(Error::NonFinite("threshold".into()));
    }
    z_hat
        .iter()
        .zip(krig_sd)
        .map(|(&z, &sd)| {
            if !z.is_finite() || !sd.is_finite() || sd < 0.0 {
                return Err(Error::NonFinite(format!("prediction {z} with sd {sd}")));
            }
            let d = z - u;
            Ok(if sd > 0.0 {
                d / sd
            } else if d > 0.0 {
                f64::INFINITY
            } else if d < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            })
        })
        .collect()
}

/// Position of the type-1 `alpha` quantile in a sample of size `b`.
fn type1_index(alpha: f64, b: usize) -> usize {
    let k = (alpha * b as f64 - 1e-9).ceil() as usize;
    k.clamp(1, b) - 1
}

/// Type-1 (inverse empirical CDF) `alpha` quantile.
pub fn type1_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[type1_index(alpha, v.len())]
}

/// Upper-tail counterpart of [`type1_quantile`]: the value exceeded by at
/// most a fraction `alpha` of the sample, mirrored so that
/// `upper(-x, a) == -type1(x, a)` exactly.
pub fn type1_upper_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[type1_index(alpha, v.len())]
}

/// Per-realization extreme of `z_prime` over the simulated exceedance set:
/// the minimum over `{z >= u}` for `Above`, the maximum over `{z <= u}`
/// for `Below`. Empty sets give `+inf` / `-inf`.
pub fn realization_extremes(
    ensemble: &ConditionalEnsemble,
    z_prime: &[f64],
    u: f64,
    direction: Direction,
) -> Result<Vec<f64>> {
    if z_prime.len() != ensemble.n_pixels() {
        return Err(Error::DimensionMismatch(format!(
            "z_prime has {} entries, ensemble {} pixels",
            z_prime.len(),
            ensemble.n_pixels()
        )));
    }
    let extremes = ensemble
        .values()
        .par_chunks(ensemble.n_pixels())
        .map(|row| match direction {
            Direction::Above => row
                .iter()
                .zip(z_prime)
                .filter(|(z, _)| **z >= u)
                .fold(f64::INFINITY, |m, (_, &zp)| m.min(zp)),
            Direction::Below => row
                .iter()
                .zip(z_prime)
                .filter(|(z, _)| **z <= u)
                .fold(f64::NEG_INFINITY, |m, (_, &zp)| m.max(zp)),
        })
        .collect();
    Ok(extremes)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Critical value from a set of per-realization extremes; returns the
/// value and the number of realizations with an empty exceedance set.
pub fn critical_value_from_extremes(extremes: &[f64], alpha: f64, direction: Direction) -> Result<(f64, usize)> {
    check_alpha(alpha)?;
    if extremes.is_empty() {
        return Err(Error::ParameterDomain("no realizations".into()));
    }
    let empty_marker = match direction {
        Direction::Above => f64::INFINITY,
        Direction::Below => f64::NEG_INFINITY,
    };
    let n_empty = extremes.iter().filter(|&&m| m == empty_marker).count();
    if n_empty == extremes.len() {
        return Err(Error::EmptyExceedanceDistribution);
    }
    let c = match direction {
        Direction::Above => type1_quantile(extremes, alpha),
        Direction::Below => type1_upper_quantile(extremes, alpha),
    };
    Ok((c, n_empty))
}

pub fn estimate_critical_value(
    ensemble: &ConditionalEnsemble,
    z_prime: &[f64],
    u: f64,
    alpha: f64,
    direction: Direction,
) -> Result<(f64, usize)> {
    check_alpha(alpha)?;
    let extremes = realization_extremes(ensemble, z_prime, u, direction)?;
    critical_value_from_extremes(&extremes, alpha, direction)
}

pub fn build_region(z_prime: &[f64], c_alpha_hat: f64, direction: Direction) -> Vec<bool> {
    match direction {
        Direction::Above => z_prime.iter().map(|&z| z >= c_alpha_hat).collect(),
        Direction::Below => z_prime.iter().map(|&z| z <= c_alpha_hat).collect(),
    }
}

/// Both directions for one threshold and level, with the derived masks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inference {
    pub above: ExceedanceReport,
    pub below: ExceedanceReport,
    /// `{z_hat >= u}`.
    pub predicted: Vec<bool>,
}

impl Inference {
    /// The above-threshold confidence region.
    pub fn liberal(&self) -> &[bool] {
        &self.above.region_mask
    }

    /// Complement of the below-threshold confidence region.
    pub fn conservative(&self) -> &[bool] {
        &self.above.complement_mask
    }

    pub fn classes(&self) -> Vec<RegionClass> {
        self.liberal()
            .iter()
            .zip(self.conservative())
            .map(|(&lib, &cons)| {
                if cons {
                    RegionClass::ConfidentExceed
                } else if lib {
                    RegionClass::PossibleExceed
                } else {
                    RegionClass::ConfidentNotExceed
                }
            })
            .collect()
    }

    /// `conservative ⊆ predicted ⊆ liberal`.
    pub fn is_nested(&self) -> bool {
        (0..self.predicted.len())
            .all(|j| (!self.conservative()[j] || self.predicted[j]) && (!self.predicted[j] || self.liberal()[j]))
    }
}

fn one_direction(
    ensemble: &ConditionalEnsemble,
    z_prime: &[f64],
    u: f64,
    alpha: f64,
    direction: Direction,
) -> Result<(f64, f64, usize)> {
    let (raw, n_empty) = match estimate_critical_value(ensemble, z_prime, u, alpha, direction) {
        Ok(v) => v,
        Err(Error::EmptyExceedanceDistribution) => match direction {
            Direction::Above => (f64::INFINITY, ensemble.n_realizations()),
            Direction::Below => (f64::NEG_INFINITY, ensemble.n_realizations()),
        },
        Err(e) => return Err(e),
    };
    // A region never smaller than the predicted set (Above) or its
    // complement (Below).
    let used = match direction {
        Direction::Above => raw.min(0.0),
        Direction::Below => raw.max(0.0),
    };
    Ok((used, raw, n_empty))
}

/// Runs both directions on the same ensemble.
pub fn combine_inferences(
    z_hat: &[f64],
    krig_sd: &[f64],
    ensemble: &ConditionalEnsemble,
    u: f64,
    alpha: f64,
) -> Result<Inference> {
    check_alpha(alpha)?;
    let z_prime = test_statistic_field(z_hat, krig_sd, u)?;
    let (c_above, raw_above, empty_above) = one_direction(ensemble, &z_prime, u, alpha, Direction::Above)?;
    let (c_below, raw_below, empty_below) = one_direction(ensemble, &z_prime, u, alpha, Direction::Below)?;
    let above_mask = build_region(&z_prime, c_above, Direction::Above);
    let below_mask = build_region(&z_prime, c_below, Direction::Below);
    let predicted = z_hat.iter().map(|&z| z >= u).collect();
    let b = ensemble.n_realizations();
    let report = |direction, c, raw, n_empty, region: &Vec<bool>, other: &Vec<bool>| ExceedanceReport {
        threshold: u,
        alpha,
        direction,
        z_prime: z_prime.clone(),
        c_alpha_hat: c,
        c_alpha_raw: raw,
        region_mask: region.clone(),
        complement_mask: other.iter().map(|&x| !x).collect(),
        n_empty_realizations: n_empty,
        n_realizations: b,
    };
    Ok(Inference {
        above: report(
            Direction::Above,
            c_above,
            raw_above,
            empty_above,
            &above_mask,
            &below_mask,
        ),
        below: report(
            Direction::Below,
            c_below,
            raw_below,
            empty_below,
            &below_mask,
            &above_mask,
        ),
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble(rows: &[&[f64]]) -> ConditionalEnsemble {
        let m = rows[0].len();
        ConditionalEnsemble::from_values(rows.len(), m, 0, rows.concat()).unwrap()
    }

    #[test]
    fn statistic_arithmetic() {
        let zp = test_statistic_field(&[3.0, 5.0, 1.0, 4.0, 3.0], &[1.0, 2.0, 0.0, 0.0, 0.0], 3.0).unwrap();
        assert_eq!(zp, vec![0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, 0.0]);
        let a = test_statistic_field(&[1.0, 2.0], &[0.5, 2.0], 3.0).unwrap();
        let b = test_statistic_field(&[1.0, 2.0], &[0.5, 2.0], 4.0).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| y < x));
        assert!(test_statistic_field(&[1.0], &[f64::NAN], 0.0).is_err());
    }

    #[test]
    fn type1_quantile_by_hand() {
        let minima: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(type1_quantile(&minima, 0.2), 2.0);
        assert_eq!(type1_quantile(&minima, 0.21), 3.0);
        assert_eq!(type1_quantile(&minima, 0.05), 1.0);
        assert_eq!(type1_quantile(&minima, 0.999), 10.0);
        assert_eq!(type1_upper_quantile(&minima, 0.2), 9.0);
        let neg: Vec<f64> = minima.iter().map(|v| -v).collect();
        for a in [0.05, 0.1, 0.2, 0.37] {
            assert_eq!(type1_upper_quantile(&neg, a), -type1_quantile(&minima, a));
        }
    }

    #[test]
    fn constant_minima() {
        let (c, empty) = critical_value_from_extremes(&[0.7; 20], 0.1, Direction::Above).unwrap();
        assert_eq!((c, empty), (0.7, 0));
    }

    #[test]
    fn single_pixel_grid() {
        let ens = ensemble(&[&[1.0], &[-1.0], &[2.0], &[0.5]]);
        let zp = [0.3];
        let (c, empty) = estimate_critical_value(&ens, &zp, 0.8, 0.25, Direction::Above).unwrap();
        assert_eq!((c, empty), (0.3, 2));
        assert_eq!(build_region(&zp, c, Direction::Above), vec![true]);
    }

    #[test]
    fn all_empty_is_an_error() {
        let ens = ensemble(&[&[1.0, 2.0], &[0.0, 0.0]]);
        let r = estimate_critical_value(&ens, &[0.0, 0.0], 10.0, 0.1, Direction::Above);
        assert!(matches!(r, Err(Error::EmptyExceedanceDistribution)));
    }

    #[test]
    fn region_boundaries() {
        let zp = [-1.0, 0.5, 2.0];
        assert_eq!(build_region(&zp, f64::NEG_INFINITY, Direction::Above), vec![true; 3]);
        assert_eq!(build_region(&zp, f64::INFINITY, Direction::Above), vec![false; 3]);
        assert_eq!(build_region(&zp, 0.5, Direction::Above), vec![false, true, true]);
        assert_eq!(build_region(&zp, 0.5, Direction::Below), vec![true, true, false]);
    }

    #[test]
    fn thresholds_at_the_extremes() {
        let ens = ensemble(&[&[1.0, 2.0, 3.0], &[1.5, 2.5, 2.0], &[0.5, 1.0, 4.0]]);
        let z_hat = [1.0, 2.0, 3.0];
        let sd = [0.5, 0.5, 0.5];
        let low = combine_inferences(&z_hat, &sd, &ens, -100.0, 0.1).unwrap();
        assert!(low.liberal().iter().all(|&x| x));
        assert!(low.conservative().iter().all(|&x| x));
        let high = combine_inferences(&z_hat, &sd, &ens, 100.0, 0.1).unwrap();
        assert!(high.liberal().iter().all(|&x| !x));
        assert!(high.conservative().iter().all(|&x| !x));
        assert_eq!(high.above.n_empty_realizations, 3);
        for inf in [&low, &high] {
            assert!(inf.is_nested());
        }
    }
}
