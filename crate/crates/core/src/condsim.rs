//! Conditional simulation of the latent field on a prediction grid.
//!
//! A zero-mean joint draw `(y_c, z_c)` of data and grid is turned into a
//! conditional realization by adding the simulated kriging error to the
//! kriging prediction: `z_tilde = z_hat + z_c - Lambda' y_c`.
//!
//! Grid points that coincide exactly with a nugget-free observation are
//! left out of the joint factorization (their joint covariance would be
//! singular); their simulated latent value is the simulated datum itself,
//! which makes every realization reproduce the observed value there.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use rayon::prelude::*;

use crate::covariance::{build_cov_matrix, SpaceTimePoint};
use crate::error::{Error, Result};
use crate::grid::PredictionGrid;
use crate::kriging::{uk_weight_matrix, FittedModel, Site, WeightMatrix};
use crate::linalg::{factorize, mvn_sample, RngStream, SpdFactor};

/// Realizations are simulated in fixed blocks of this many, so the
/// arithmetic for realization `i` never depends on the worker count.
pub const BLOCK: usize = 32;

const MAGIC: &[u8; 8] = b"STXENS01";

/// Factorized covariance of the observed data and the free grid points.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    n_obs: usize,
    /// Grid indices included in the joint, in order.
    free: Vec<usize>,
    /// For each grid index, the nugget-free observation it coincides with.
    pinned: Vec<Option<usize>>,
    factor: SpdFactor,
}

impl JointCovariance {
    pub fn new(model: &FittedModel, grid_points: &[SpaceTimePoint]) -> Result<Self> {
        let n_obs = model.n_obs();
        let pinned: Vec<Option<usize>> = grid_points.iter().map(|p| model.exact_data_site(p)).collect();
        let free: Vec<usize> = (0..grid_points.len()).filter(|&j| pinned[j].is_none()).collect();
        let data_points = model.dataset().points();
        let latent_free: Vec<SpaceTimePoint> = free.iter().map(|&j| grid_points[j]).collect();

        let total = n_obs + free.len();
        let mut all = data_points.clone();
        all.extend_from_slice(&latent_free);
        // latent block first, then the nugget on the data block
        let mut joint = build_cov_matrix(&all, model.params(), false)?;
        let with_nugget = build_cov_matrix(&data_points, model.params(), true)?;
        for j in 0..n_obs {
            for i in 0..n_obs {
                joint[(i, j)] = with_nugget[(i, j)];
            }
        }
        debug_assert_eq!(joint.nrows(), total);
        let factor = factorize(&joint)?;
        Ok(Self {
            n_obs,
            free,
            pinned,
            factor,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_grid(&self) -> usize {
        self.pinned.len()
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn pinned(&self) -> &[Option<usize>] {
        &self.pinned
    }

    /// Expands a joint draw into `(y_c, z_c)` over the full grid.
    fn split(&self, draw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y_c = draw[..self.n_obs].to_vec();
        let mut z_c = vec![0.0; self.n_grid()];
        for (k, &j) in self.free.iter().enumerate() {
            z_c[j] = draw[self.n_obs + k];
        }
        for (j, pin) in self.pinned.iter().enumerate() {
            if let Some(i) = pin {
                z_c[j] = y_c[*i];
            }
        }
        (y_c, z_c)
    }

    /// One zero-mean draw of `(y_c, z_c)`.
    pub fn draw(&self, rng: &mut RngStream) -> Result<(Vec<f64>, Vec<f64>)> {
        let mean = vec![0.0; self.factor.dim()];
        let draw = mvn_sample(&mean, &self.factor, rng)?;
        Ok(self.split(&draw))
    }
}

/// One zero-mean draw from the joint distribution of data and latent grid values.
pub fn simulate_joint(
    model: &FittedModel,
    grid_points: &[SpaceTimePoint],
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    JointCovariance::new(model, grid_points)?.draw(rng)
}

/// `z_hat + z_c - Lambda' y_c`.
pub fn conditional_realization(z_hat: &[f64], lambda: &Mat<f64>, y_c: &[f64], z_c: &[f64]) -> Result<Vec<f64>> {
    let m = z_hat.len();
    let n = y_c.len();
    if lambda.nrows() != n || lambda.ncols() != m || z_c.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "lambda {}x{}, y_c {n}, z_hat {m}, z_c {}",
            lambda.nrows(),
            lambda.ncols(),
            z_c.len()
        )));
    }
    Ok((0..m)
        .map(|j| {
            let ly: f64 = lambda.col_as_slice(j).iter().zip(y_c).map(|(a, b)| a * b).sum();
            z_hat[j] + (z_c[j] - ly)
        })
        .collect())
}

/// `B` conditional realizations over `m` grid points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalEnsemble {
    b: usize,
    m: usize,
    seed: u64,
    values: Vec<f64>,
}

impl ConditionalEnsemble {
    pub fn from_values(b: usize, m: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        if b == 0 || m == 0 || values.len() != b * m {
            return Err(Error::DimensionMismatch(format!(
                "ensemble {b}x{m} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble value".into()));
        }
        Ok(Self { b, m, seed, values })
    }

    pub fn n_realizations(&self) -> usize {
        self.b
    }

    pub fn n_pixels(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn realization(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn realizations(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Binary dump: 8-byte magic, then `B`, `m`, seed as little-endian
    /// u64, then `B * m` little-endian f64 values row-major.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
        write(MAGIC)?;
        write(&(self.b as u64).to_le_bytes())?;
        write(&(self.m as u64).to_le_bytes())?;
        write(&self.seed.to_le_bytes())?;
        for v in &self.values {
            write(&v.to_le_bytes())?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut buf8 = [0u8; 8];
        let mut read8 = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
            r.read_exact(&mut buf8).map_err(|e| Error::io(path, e))?;
            Ok(buf8)
        };
        if &read8(&mut r)? != MAGIC {
            return Err(Error::Data(format!("{} is not an ensemble dump", path.display())));
        }
        let b = u64::from_le_bytes(read8(&mut r)?) as usize;
        let m = u64::from_le_bytes(read8(&mut r)?) as usize;
        let seed = u64::from_le_bytes(read8(&mut r)?);
        let mut values = Vec::with_capacity(b * m);
        for _ in 0..b * m {
            values.push(f64::from_le_bytes(read8(&mut r)?));
        }
        Self::from_values(b, m, seed, values)
    }
}

/// Kriging weights, joint factor and bookkeeping reused across every
/// realization of one analysis.
#[derive(Debug, Clone)]
pub struct ConditionalSimulator {
    weights: WeightMatrix,
    joint: JointCovariance,
    /// `Lambda'` restricted to the free grid points (`m_free x n`).
    lambda_free_t: Mat<f64>,
    obs_values: Vec<f64>,
}

impl ConditionalSimulator {
    pub fn new(model: &FittedModel, sites: &[Site]) -> Result<Self> {
        let weights = uk_weight_matrix(model, sites)?;
        let points: Vec<SpaceTimePoint> = sites.iter().map(|s| s.point).collect();
        let joint = JointCovariance::new(model, &points)?;
        let n = model.n_obs();
        let lambda_free_t = Mat::from_fn(joint.free.len(), n, |k, i| weights.lambda[(i, joint.free[k])]);
        Ok(Self {
            weights,
            joint,
            lambda_free_t,
            obs_values: model.dataset().values(),
        })
    }

    /// Simulator over the pixel centers of `grid` at the dataset's target time.
    pub fn for_grid(model: &FittedModel, grid: &PredictionGrid) -> Result<Self> {
        let t = model.dataset().target_time();
        let sites: Vec<Site> = grid.points_at(t).into_iter().map(Site::from).collect();
        Self::new(model, &sites)
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn z_hat(&self) -> &[f64] {
        &self.weights.z_hat
    }

    pub fn krig_sd(&self) -> &[f64] {
        &self.weights.krig_sd
    }

    pub fn joint(&self) -> &JointCovariance {
        &self.joint
    }

    pub fn n_pixels(&self) -> usize {
        self.joint.n_grid()
    }

    /// Realization `i` computed on its own from `RngStream::child(seed, i)`.
    pub fn realization(&self, seed: u64, i: usize) -> Result<Vec<f64>> {
        let (y_c, z_c) = self.joint.draw(&mut RngStream::child(seed, i as u64))?;
        conditional_realization(&self.weights.z_hat, &self.weights.lambda, &y_c, &z_c)
    }

    /// Fills `out` (row-major, `count` rows) with realizations
    /// `first .. first + count`.
    fn fill_block(&self, seed: u64, first: usize, out: &mut [f64]) {
        let m = self.n_pixels();
        let n = self.joint.n_obs;
        let dim = self.joint.factor.dim();
        let count = out.len() / m;
        let mut normals = Mat::<f64>::zeros(dim, count);
        for r in 0..count {
            RngStream::child(seed, (first + r) as u64).fill_standard_normal(normals.col_as_slice_mut(r));
        }
        let mut draws = Mat::<f64>::zeros(dim, count);
        matmul(
            &mut draws,
            Accum::Replace,
            self.joint.factor.lower(),
            &normals,
            1.0,
            Par::Seq,
        );
        let free = &self.joint.free;
        let mut kriged = Mat::<f64>::zeros(free.len(), count);
        matmul(
            &mut kriged,
            Accum::Replace,
            &self.lambda_free_t,
            draws.as_ref().subrows(0, n),
            1.0,
            Par::Seq,
        );
        let z_hat = &self.weights.z_hat;
        for r in 0..count {
            let row = &mut out[r * m..(r + 1) * m];
            for (k, &j) in free.iter().enumerate() {
                row[j] = z_hat[j] + (draws[(n + k, r)] - kriged[(k, r)]);
            }
            for (j, pin) in self.joint.pinned.iter().enumerate() {
                if let Some(i) = pin {
                    row[j] = self.obs_values[*i];
                }
            }
        }
    }

    /// `b` realizations using the current rayon pool.
    pub fn ensemble(&self, b: usize, seed: u64) -> Result<ConditionalEnsemble> {
        if b == 0 {
            return Err(Error::ParameterDomain("ensemble size must be >= 1".into()));
        }
        let m = self.n_pixels();
        let mut values = vec![0.0; b * m];
        values
            .par_chunks_mut(BLOCK * m)
            .enumerate()
            .for_each(|(blk, out)| self.fill_block(seed, blk * BLOCK, out));
        ConditionalEnsemble::from_values(b, m, seed, values)
    }

    /// `b` realizations on a dedicated pool of `workers` threads.
    pub fn ensemble_with_workers(&self, b: usize, seed: u64, workers: usize) -> Result<ConditionalEnsemble> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| self.ensemble(b, seed))
    }

    /// Streams realizations `0..b` in order, holding one block in memory.
    pub fn for_each_realization(&self, b: usize, seed: u64, mut f: impl FnMut(usize, &[f64])) -> Result<()> {
        let m = self.n_pixels();
        let mut buf = vec![0.0; BLOCK * m];
        let mut first = 0;
        while first < b {
            let count = BLOCK.min(b - first);
            let out = &mut buf[..count * m];
            self.fill_block(seed, first, out);
            for (r, row) in out.chunks_exact(m).enumerate() {
                f(first + r, row);
            }
            first += count;
        }
        Ok(())
    }
}

/// `b` conditional realizations over the pixel centers of `grid` at the
/// dataset's target time; realization `i` uses `RngStream::child(master_seed, i)`.
pub fn generate_ensemble(
    model: &FittedModel,
    grid: &PredictionGrid,
    b: usize,
    master_seed: u64,
) -> Result<ConditionalEnsemble> {
    ConditionalSimulator::for_grid(model, grid)?.ensemble(b, master_seed)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::covariance::{CovarianceParams, NuggetSpec, SpatialCovKind, TemporalCovKind};
    use crate::kriging::{CovariateBuilder, Dataset, Observation};

    fn model(nugget: f64) -> FittedModel {
        let coords = [(0.1, 0.2), (0.8, 0.3), (0.4, 0.9), (0.6, 0.6)];
        let obs = coords
            .iter()
            .enumerate()
            .flat_map(|(k, &(x, y))| {
                (1..=2).map(move |t| Observation {
                    site: SpaceTimePoint::new(x, y, t as f64).into(),
                    value: (k as f64) * 0.5 - t as f64 * 0.1,
                })
            })
            .collect();
        let ds = Arc::new(Dataset::new(obs, CovariateBuilder::intercept(), 3.0).unwrap());
        let params = CovarianceParams::new(
            SpatialCovKind::Exponential {
                variance: 2.0,
                range: 0.5,
            },
            TemporalCovKind::Ar1 { rho: 0.6 },
            NuggetSpec::Constant { sigma_eps2: nugget },
        )
        .unwrap();
        FittedModel::new(ds, params).unwrap()
    }

    #[test]
    fn conditional_realization_identities() {
        let lambda = Mat::from_fn(2, 3, |i, j| (i + 2 * j) as f64 * 0.1);
        let z_hat = [1.0, 2.0, 3.0];
        let y_c = [0.5, -1.0];
        let lz: Vec<f64> = (0..3)
            .map(|j| lambda[(0, j)] * y_c[0] + lambda[(1, j)] * y_c[1])
            .collect();
        let out = conditional_realization(&z_hat, &lambda, &y_c, &lz).unwrap();
        for (a, b) in out.iter().zip(z_hat) {
            assert!((a - b).abs() < 1e-15);
        }
        let z_c = [0.3, 0.2, 0.1];
        let out = conditional_realization(&z_hat, &lambda, &[0.0, 0.0], &z_c).unwrap();
        assert_eq!(out, vec![1.3, 2.2, 3.1]);
        assert!(conditional_realization(&z_hat, &lambda, &[0.0], &z_c).is_err());
    }

    #[test]
    fn joint_draw_is_seeded() {
        let m = model(0.1);
        let grid = [SpaceTimePoint::new(0.5, 0.5, 3.0), SpaceTimePoint::new(0.2, 0.1, 3.0)];
        let a = simulate_joint(&m, &grid, &mut RngStream::child(9, 0)).unwrap();
        let b = simulate_joint(&m, &grid, &mut RngStream::child(9, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.len(), 8);
        assert_eq!(a.1.len(), 2);
    }

    #[test]
    fn block_path_matches_single_realization_path() {
        let m = model(0.05);
        let sites: Vec<Site> = (0..5)
            .map(|k| SpaceTimePoint::new(0.1 + 0.2 * k as f64, 0.5, 3.0).into())
            .collect();
        let sim = ConditionalSimulator::new(&m, &sites).unwrap();
        let ens = sim.ensemble(70, 1234).unwrap();
        for i in [0, 31, 32, 69] {
            let single = sim.realization(1234, i).unwrap();
            for (a, b) in single.iter().zip(ens.realization(i)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let mut streamed = Vec::new();
        sim.for_each_realization(70, 1234, |_, row| streamed.extend_from_slice(row))
            .unwrap();
        assert_eq!(streamed, ens.values());
    }

    #[test]
    fn pinned_pixels_reproduce_data() {
        let m = model(0.0);
        let obs = m.dataset().observations().to_vec();
        let sites: Vec<Site> = vec![
            obs[1].site.clone(),
            SpaceTimePoint::new(0.5, 0.5, 2.0).into(),
            obs[4].site.clone(),
        ];
        let sim = ConditionalSimulator::new(&m, &sites).unwrap();
        assert_eq!(sim.joint().pinned()[0], Some(1));
        let ens = sim.ensemble(40, 5).unwrap();
        for row in ens.realizations() {
            assert_eq!(row[0], obs[1].value);
            assert_eq!(row[2], obs[4].value);
        }
        let single = sim.realization(5, 3).unwrap();
        assert!((single[0] - obs[1].value).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let m = model(0.1);
        let sites: Vec<Site> = (0..6)
            .map(|k| SpaceTimePoint::new(0.15 * k as f64, 0.4, 3.0).into())
            .collect();
        let sim = ConditionalSimulator::new(&m, &sites).unwrap();
        let a = sim.ensemble_with_workers(100, 77, 1).unwrap();
        let b = sim.ensemble_with_workers(100, 77, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binary_dump_round_trip() {
        let ens = ConditionalEnsemble::from_values(2, 3, 99, vec![1.0, -2.5, 3.0, 0.0, 1e-300, -7.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ens.bin");
        ens.write_binary(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 32 + 6 * 8);
        assert_eq!(ConditionalEnsemble::read_binary(&path).unwrap(), ens);
    }
}
