//! Dense symmetric positive-definite algebra, GLS, and Gaussian sampling.
//!
//! Factorizations and products run single-threaded so that results are
//! bit-reproducible; parallelism lives one level up, across realizations
//! or replicates.

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Ridge factor applied by [`factorize_with_ridge`], relative to the mean
/// diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Lower Cholesky factor `L` of a symmetric positive-definite `A = L L^T`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Mat<f64>,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> MatRef<'_, f64> {
        self.lower.as_ref()
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Mat<f64> {
        let n = self.dim();
        let mut out = Mat::<f64>::zeros(n, n);
        matmul(
            &mut out,
            Accum::Replace,
            &self.lower,
            self.lower.transpose(),
            1.0,
            Par::Seq,
        );
        out
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<f64>()
    }

    /// `L^{-1} B` in place.
    pub fn whiten_in_place(&self, rhs: &mut Mat<f64>) -> Result<()> {
        self.check_rows(rhs.nrows())?;
        solve_lower_triangular_in_place(self.lower.as_ref(), rhs.as_mut(), Par::Seq);
        Ok(())
    }

    /// `L^{-1} b`.
    pub fn whiten_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = column(b);
        self.whiten_in_place(&mut rhs)?;
        Ok(rhs.col_as_slice(0).to_vec())
    }

    /// `A^{-1} B` in place via two triangular solves.
    pub fn solve_in_place(&self, rhs: &mut Mat<f64>) -> Result<()> {
        self.check_rows(rhs.nrows())?;
        solve_lower_triangular_in_place(self.lower.as_ref(), rhs.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(self.lower.transpose(), rhs.as_mut(), Par::Seq);
        Ok(())
    }

    pub fn solve(&self, rhs: &Mat<f64>) -> Result<Mat<f64>> {
        let mut out = rhs.clone();
        self.solve_in_place(&mut out)?;
        Ok(out)
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = column(b);
        self.solve_in_place(&mut rhs)?;
        Ok(rhs.col_as_slice(0).to_vec())
    }

    /// `b^T A^{-1} b`.
    pub fn quad_form(&self, b: &[f64]) -> Result<f64> {
        Ok(self.whiten_vec(b)?.iter().map(|v| v * v).sum())
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "factor is {n}x{n}, right-hand side has {rows} rows",
                n = self.dim()
            )));
        }
        Ok(())
    }
}

/// Single-column matrix holding `values`.
pub fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

fn symmetrized(a: &Mat<f64>) -> Result<Mat<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let out = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    if (0..n).any(|j| out.col_as_slice(j).iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    Ok(out)
}

/// Cholesky factorization of the symmetrized input.
pub fn factorize(a: &Mat<f64>) -> Result<SpdFactor> {
    let sym = symmetrized(a)?;
    factor_symmetric(sym)
}

/// Cholesky factorization after adding `delta * mean(diag)` to the diagonal.
pub fn factorize_with_ridge(a: &Mat<f64>, delta: f64) -> Result<SpdFactor> {
    let mut sym = symmetrized(a)?;
    let n = sym.nrows();
    if n > 0 {
        let mean_diag = (0..n).map(|i| sym[(i, i)]).sum::<f64>() / n as f64;
        for i in 0..n {
            sym[(i, i)] += delta * mean_diag;
        }
    }
    factor_symmetric(sym)
}

fn factor_symmetric(sym: Mat<f64>) -> Result<SpdFactor> {
    let llt = sym.llt(Side::Lower).map_err(
        |faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }| Error::NotPositiveDefinite {
            pivot: index + 1,
        },
    )?;
    let n = sym.nrows();
    let l = llt.L();
    let lower = Mat::from_fn(n, n, |i, j| if i >= j { l[(i, j)] } else { 0.0 });
    if let Some(i) = (0..n).find(|&i| lower[(i, i)].is_nan() || lower[(i, i)] <= 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: i + 1 });
    }
    Ok(SpdFactor { lower })
}

/// Generalized least-squares fit.
#[derive(Debug, Clone)]
pub struct GlsEstimate {
    pub beta: Vec<f64>,
    /// Factor of `X^T Sigma^{-1} X`.
    pub cov_factor: SpdFactor,
}

/// `beta = (X^T S^-1 X)^-1 X^T S^-1 y`, with `sigma` the factor of `S`.
pub fn gls_estimate(x: &Mat<f64>, sigma: &SpdFactor, y: &[f64]) -> Result<GlsEstimate> {
    let n = sigma.dim();
    if x.nrows() != n || y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "GLS with {n} observations, design has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let k = x.ncols();
    if k > n {
        return Err(Error::DimensionMismatch(format!(
            "{k} covariates exceed {n} observations"
        )));
    }
    let mut xw = x.clone();
    sigma.whiten_in_place(&mut xw)?;
    let yw = sigma.whiten_vec(y)?;
    let mut info = Mat::<f64>::zeros(k, k);
    matmul(&mut info, Accum::Replace, xw.transpose(), &xw, 1.0, Par::Seq);
    let rhs: Vec<f64> = (0..k)
        .map(|j| xw.col_as_slice(j).iter().zip(&yw).map(|(a, b)| a * b).sum())
        .collect();
    let cov_factor = factorize(&info)?;
    let beta = cov_factor.solve_vec(&rhs)?;
    Ok(GlsEstimate { beta, cov_factor })
}

/// Seedable pseudo-random stream.
///
/// Streams are ChaCha8. `RngStream::child(master, index)` seeds ChaCha8
/// from `master` and selects stream number `index`, so substreams are
/// disjoint and depend only on `(master, index)`. Standard normals use the
/// ziggurat sampler of `rand_distr::StandardNormal`.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn child(master_seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index);
        Self { rng }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }
}

/// SplitMix64 mixing of a seed with a tag and an index; used to derive
/// independent master seeds for nested stages.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ tag) ^ index)
}

/// `mean + L z` for a lower-triangular (or any square) `lower`.
pub fn mvn_sample_with_lower(mean: &[f64], lower: MatRef<'_, f64>, rng: &mut RngStream) -> Result<Vec<f64>> {
    let n = mean.len();
    if lower.nrows() != n || lower.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "mean has {n} entries, factor is {}x{}",
            lower.nrows(),
            lower.ncols()
        )));
    }
    let mut z = vec![0.0; n];
    rng.fill_standard_normal(&mut z);
    let mut out = mean.to_vec();
    for (j, &zj) in z.iter().enumerate() {
        if zj == 0.0 {
            continue;
        }
        for i in j..n {
            out[i] += lower[(i, j)] * zj;
        }
        for i in 0..j {
            out[i] += lower[(i, j)] * zj;
        }
    }
    Ok(out)
}

/// One draw from `N(mean, L L^T)`.
pub fn mvn_sample(mean: &[f64], factor: &SpdFactor, rng: &mut RngStream) -> Result<Vec<f64>> {
    mvn_sample_with_lower(mean, factor.lower(), rng)
}
