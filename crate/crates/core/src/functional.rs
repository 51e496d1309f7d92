//! Dimension of the dynamic subspace of a curve time series.
//!
//! Curves are given by coefficient vectors `c^m` (rows of an `M x K`
//! matrix, centred over time). The lag-window matrix
//!
//! `D = (M-p)^-2 sum_{k=1..p} C_k C_k^T`,  `C_k = sum_{r=1..M-p} c^r (c^{r+k})^T`
//!
//! is positive semidefinite and its rank equals the number of curve
//! directions carrying serial dependence; white noise contributes nothing in
//! expectation. The dimension is chosen by sequential bootstrap tests on the
//! eigenvalues of `D`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_id, stream_rng};

/// Mean-centred curve time series in coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    coeffs: DMatrix<f64>,
    mean: DVector<f64>,
}

impl CurveSeries {
    /// Centres `curves` (one row per time point) over time.
    pub fn from_curves(curves: DMatrix<f64>) -> Result<Self> {
        if curves.nrows() == 0 || curves.ncols() == 0 {
            return Err(Error::Dimension("empty curve series".into()));
        }
        let m = curves.nrows() as f64;
        let mean = DVector::from_iterator(curves.ncols(), curves.column_iter().map(|c| c.sum() / m));
        let mut coeffs = curves;
        for (j, mut col) in coeffs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        Ok(CurveSeries { coeffs, mean })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("curves differ in length".into()));
        }
        Self::from_curves(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
    }

    /// Centred coefficients, `M x K`.
    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Uncentred curves, `M x K`.
    pub fn curves(&self) -> DMatrix<f64> {
        let mut out = self.coeffs.clone();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }
}

fn check_lag(m: usize, p: usize) -> Result<()> {
    if p == 0 || p + 2 > m {
        return Err(Error::InvalidParameter(format!(
            "lag window p = {p} must satisfy 1 <= p <= M - 2 = {}",
            m as isize - 2
        )));
    }
    Ok(())
}

/// `D` for an arbitrary `M x K` coefficient matrix, in `O(p M K^2)`.
pub fn d_matrix(x: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let (m, k) = x.shape();
    check_lag(m, p)?;
    let n = m - p;
    let head = x.rows(0, n);
    let mut d = DMatrix::zeros(k, k);
    for lag in 1..=p {
        let ck = head.transpose() * x.rows(lag, n);
        d += &ck * ck.transpose();
    }
    d /= (n * n) as f64;
    // exact symmetry
    let sym = (&d + d.transpose()) * 0.5;
    Ok(sym)
}

pub fn build_d_matrix(cs: &CurveSeries, p: usize) -> Result<DMatrix<f64>> {
    d_matrix(cs.coeffs(), p)
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue. Each
/// eigenvector is signed so its largest-magnitude entry is positive.
pub fn sorted_eigen(d: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(d.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).clone_owned();
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

fn sorted_eigenvalues(d: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(d).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// How residual curves are resampled under the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    /// Rows drawn independently with replacement.
    Iid,
    /// Stationary (geometric block length) bootstrap with the given mean
    /// block length; `0` means `ceil(M^(1/3))`.
    StationaryBlock(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    /// Lag window.
    pub p: usize,
    /// Bootstrap replicates per test.
    pub replicates: usize,
    pub alpha: f64,
    pub resampling: Resampling,
    pub seed: u64,
    /// Stream family, so that several series sharing a seed stay independent.
    pub stream: u32,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            p: 2,
            replicates: 500,
            alpha: 0.05,
            resampling: Resampling::Iid,
            seed: 0,
            stream: 0,
        }
    }
}

impl DimensionConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 8 {
            return Err(Error::InvalidParameter(format!(
                "dimension estimation needs at least 8 curves, got {m}"
            )));
        }
        check_lag(m, self.p)?;
        if self.replicates < 100 {
            return Err(Error::InvalidParameter(format!(
                "at least 100 bootstrap replicates required, got {}",
                self.replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalModel {
    pub d_hat: usize,
    /// `K x d_hat`, orthonormal columns.
    pub eigenfunctions: DMatrix<f64>,
    /// `M x d_hat`, `loadings[(m, k)] = <c^m, h_k>`.
    pub loadings: DMatrix<f64>,
    /// All eigenvalues of `D`, descending.
    pub eigenvalues: DVector<f64>,
    pub mean: DVector<f64>,
    pub p: usize,
    /// Bootstrap p-value of each test performed, in order `q = 0, 1, ...`.
    pub p_values: Vec<f64>,
}

impl FunctionalModel {
    /// Model with a fixed dimension, skipping the tests.
    pub fn with_dimension(cs: &CurveSeries, p: usize, d: usize) -> Result<Self> {
        let dmat = build_d_matrix(cs, p)?;
        let (values, vectors) = sorted_eigen(&dmat);
        if d > cs.dim() {
            return Err(Error::InvalidParameter(format!(
                "dimension {d} exceeds curve length {}",
                cs.dim()
            )));
        }
        let h = vectors.columns(0, d).clone_owned();
        let loadings = cs.coeffs() * &h;
        Ok(FunctionalModel {
            d_hat: d,
            eigenfunctions: h,
            loadings,
            eigenvalues: values,
            mean: cs.mean().clone(),
            p,
            p_values: Vec::new(),
        })
    }

    /// Curves `mean + loadings * H^T` for arbitrary loadings rows.
    pub fn curves_from_loadings(&self, loadings: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if loadings.ncols() != self.d_hat {
            return Err(Error::Dimension(format!(
                "loadings have {} columns, model dimension is {}",
                loadings.ncols(),
                self.d_hat
            )));
        }
        let mut out = loadings * self.eigenfunctions.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }
}

fn resample_rows<R: Rng>(rows: usize, scheme: Resampling, rng: &mut R) -> Vec<usize> {
    match scheme {
        Resampling::Iid => (0..rows).map(|_| rng.random_range(0..rows)).collect(),
        Resampling::StationaryBlock(mean_len) => {
            let len = if mean_len == 0 {
                (rows as f64).cbrt().ceil().max(1.0)
            } else {
                mean_len as f64
            };
            let restart = 1.0 / len;
            let mut idx = Vec::with_capacity(rows);
            let mut cur = rng.random_range(0..rows);
            for _ in 0..rows {
                idx.push(cur);
                cur = if rng.random::<f64>() < restart {
                    rng.random_range(0..rows)
                } else {
                    (cur + 1) % rows
                };
            }
            idx
        }
    }
}

fn centre_columns(x: &mut DMatrix<f64>) {
    let m = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / m;
        col.add_scalar_mut(-mean);
    }
}

/// Relative size below which an eigenvalue is treated as exactly zero.
const ZERO_EIGEN_RTOL: f64 = 1e-10;
const ZERO_EIGEN_ATOL: f64 = 1e-24;

/// Sequentially tests `lambda_{q+1} = 0` for `q = 0, 1, ...` and returns the
/// model of the first non-rejected dimension.
///
/// Under the null of dimension `q`, bootstrap curves are the rank-`q`
/// projection plus resampled residual rows; the observed eigenvalue is
/// rejected as zero when it exceeds the `1 - alpha` quantile of its
/// bootstrap distribution.
pub fn estimate_dimension(cs: &CurveSeries, cfg: &DimensionConfig) -> Result<FunctionalModel> {
    let (m, k) = (cs.len(), cs.dim());
    cfg.validate(m)?;
    let x = cs.coeffs();
    let dmat = build_d_matrix(cs, cfg.p)?;
    let (values, vectors) = sorted_eigen(&dmat);
    // D is quartic in the curves; compare against the uncentred curve energy
    // so that centring round-off never counts as signal.
    let energy = cs.curves().norm_squared() / m as f64;
    let floor = (ZERO_EIGEN_ATOL * energy * energy).max(f64::MIN_POSITIVE);
    let scale = values[0].abs();
    let max_dim = k.min(m - cfg.p);

    let mut p_values = Vec::new();
    let mut d_hat = 0;
    while d_hat < max_dim {
        let q = d_hat;
        let observed = values[q];
        if observed <= ZERO_EIGEN_RTOL * scale || observed <= floor {
            p_values.push(1.0);
            break;
        }
        let h = vectors.columns(0, q);
        let fitted = x * h * h.transpose();
        let resid = x - &fitted;
        let boot: Vec<f64> = (0..cfg.replicates)
            .into_par_iter()
            .map(|b| {
                let stream = stream_id(cfg.stream, (q * cfg.replicates + b) as u64);
                let mut rng = stream_rng(cfg.seed, stream);
                let idx = resample_rows(m, cfg.resampling, &mut rng);
                let mut y = fitted.clone();
                for (row, &src) in idx.iter().enumerate() {
                    let mut dst = y.row_mut(row);
                    dst += resid.row(src);
                }
                centre_columns(&mut y);
                let d = d_matrix(&y, cfg.p).expect("lag validated");
                sorted_eigenvalues(d)[q]
            })
            .collect();
        let exceed = boot.iter().filter(|&&v| v >= observed).count();
        p_values.push(exceed as f64 / cfg.replicates as f64);
        let mut sorted = boot;
        sorted.sort_by(f64::total_cmp);
        let pos = (((1.0 - cfg.alpha) * cfg.replicates as f64).ceil() as usize).clamp(1, cfg.replicates) - 1;
        if observed > sorted[pos] {
            d_hat += 1;
        } else {
            break;
        }
    }

    let h = vectors.columns(0, d_hat).clone_owned();
    let loadings = x * &h;
    Ok(FunctionalModel {
        d_hat,
        eigenfunctions: h,
        loadings,
        eigenvalues: values,
        mean: cs.mean().clone(),
        p: cfg.p,
        p_values,
    })
}

/// Smoothed curves `mean + (c H) H^T`, uncentred, `M x K`.
pub fn reconstruct(model: &FunctionalModel, cs: &CurveSeries) -> Result<DMatrix<f64>> {
    if cs.dim() != model.eigenfunctions.nrows() {
        return Err(Error::Dimension(format!(
            "curves have {} coefficients, model expects {}",
            cs.dim(),
            model.eigenfunctions.nrows()
        )));
    }
    let loadings = cs.coeffs() * &model.eigenfunctions;
    let mut out = loadings * model.eigenfunctions.transpose();
    for mut row in out.row_iter_mut() {
        row += cs.mean().transpose();
    }
    Ok(out)
}

/// Least-squares AR(1) with intercept, `x_t = c + phi x_{t-1}`.
/// A series without variation gets `phi = 0`.
pub fn fit_ar1(series: &[f64]) -> (f64, f64) {
    let n = series.len().saturating_sub(1);
    if n == 0 {
        return (series.first().copied().unwrap_or(0.0), 0.0);
    }
    let prev = &series[..n];
    let next = &series[1..];
    let mx = prev.iter().sum::<f64>() / n as f64;
    let my = next.iter().sum::<f64>() / n as f64;
    let sxx: f64 = prev.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = prev.iter().zip(next).map(|(x, y)| (x - mx) * (y - my)).sum();
    let scale = prev.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let phi = if sxx > 1e-24 * scale * scale * n as f64 { sxy / sxx } else { 0.0 };
    (my - phi * mx, phi)
}

/// Point forecasts `horizon x d_hat`, one AR(1) per loading component.
pub fn forecast_loadings(model: &FunctionalModel, horizon: usize) -> Result<DMatrix<f64>> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let m = model.loadings.nrows();
    if m < 10 {
        return Err(Error::InvalidParameter(format!(
            "forecasting needs at least 10 observations, got {m}"
        )));
    }
    let mut out = DMatrix::zeros(horizon, model.d_hat);
    for (k, col) in model.loadings.column_iter().enumerate() {
        let series: Vec<f64> = col.iter().copied().collect();
        let (c, phi) = fit_ar1(&series);
        let mut last = series[m - 1];
        for h in 0..horizon {
            last = c + phi * last;
            out[(h, k)] = last;
        }
    }
    Ok(out)
}
