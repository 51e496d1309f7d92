//! Ordinary kriging with a tapered exponential covariance.
//!
//! The covariance between sites at distance `h` is
//! `C(h) = tau2 1[h = 0] + sigma2 exp(-h / theta) W(h, r)` with the
//! Wendland-1 taper `W`, so `C` vanishes beyond `r` and the kriging system
//! is sparse. The same taper multiplies the cross-covariance vector.

mod optimize;
mod sparse;
mod variogram;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::raster::RasterSeries;

pub use optimize::{Minimum, NelderMead};
pub use sparse::{reverse_cuthill_mckee, EnvelopeCholesky, SparseSymmetric};
pub use variogram::{contrast, empirical_variogram, fit_variogram, EmpiricalVariogram, VariogramConfig, VariogramFit};

/// `(1 - h/r)_+^4 (1 + 4h/r)`.
pub fn wendland_taper(h: f64, r: f64) -> f64 {
    if h >= r {
        return 0.0;
    }
    let x = h / r;
    (1.0 - x).powi(4) * (1.0 + 4.0 * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    /// Nugget.
    pub tau2: f64,
    /// Partial sill.
    pub sigma2: f64,
    /// Exponential range.
    pub theta: f64,
    pub taper_range: f64,
}

impl VariogramModel {
    /// Model with the default taper range `3 theta`.
    pub fn new(tau2: f64, sigma2: f64, theta: f64) -> Self {
        VariogramModel {
            tau2,
            sigma2,
            theta,
            taper_range: 3.0 * theta,
        }
    }

    pub fn with_taper_range(mut self, r: f64) -> Self {
        self.taper_range = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau2 >= 0.0
            && self.sigma2 > 0.0
            && self.theta > 0.0
            && self.taper_range > 0.0
            && self.tau2.is_finite()
            && self.sigma2.is_finite()
            && self.theta.is_finite();
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid variogram model {self:?}")));
        }
        Ok(())
    }

    pub fn correlation(&self, h: f64) -> f64 {
        (-h / self.theta).exp()
    }

    /// `gamma(h) = tau2 + sigma2 (1 - rho(h))` for `h > 0`, zero at the origin.
    pub fn semivariogram(&self, h: f64) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        self.tau2 + self.sigma2 * (1.0 - self.correlation(h))
    }

    /// Tapered structured covariance `sigma2 rho(h) W(h, r)` (no nugget).
    pub fn tapered_covariance(&self, h: f64) -> f64 {
        self.sigma2 * self.correlation(h) * wendland_taper(h, self.taper_range)
    }
}

/// Prediction locations on a regular lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGrid {
    pub rows: usize,
    pub cols: usize,
    /// Coordinates `(x, y)` of target `(0, 0)`.
    pub origin: (f64, f64),
    pub spacing: (f64, f64),
}

impl TargetGrid {
    /// The observed pixel sites of a series.
    pub fn observed<T>(series: &RasterSeries<T>) -> Self
    where
        T: crate::scalar::Scalar,
    {
        TargetGrid {
            rows: series.rows(),
            cols: series.cols(),
            origin: (0.0, 0.0),
            spacing: series.pixel_spacing(),
        }
    }

    pub fn sites(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push([
                    self.origin.0 + j as f64 * self.spacing.0,
                    self.origin.1 + i as f64 * self.spacing.1,
                ]);
            }
        }
        out
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform bucket grid for fixed-radius neighbour queries.
struct Buckets {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(sites: &[[f64; 2]], radius: f64) -> Self {
        let min_x = sites.iter().map(|s| s[0]).fold(f64::INFINITY, f64::min);
        let min_y = sites.iter().map(|s| s[1]).fold(f64::INFINITY, f64::min);
        let max_x = sites.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
        let max_y = sites.iter().map(|s| s[1]).fold(f64::NEG_INFINITY, f64::max);
        let span = (max_x - min_x).max(max_y - min_y).max(f64::MIN_POSITIVE);
        // cap the bucket count; huge radii collapse to a single bucket
        let cell = radius.max(span / 256.0).max(f64::MIN_POSITIVE);
        let nx = (((max_x - min_x) / cell) as usize + 1).min(257);
        let ny = (((max_y - min_y) / cell) as usize + 1).min(257);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut b = Buckets { origin: [min_x, min_y], cell, nx, ny, cells: Vec::new() };
        for (i, s) in sites.iter().enumerate() {
            let (cx, cy) = b.cell_of(*s);
            cells[cy * nx + cx].push(i);
        }
        b.cells = cells;
        b
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let cx = ((p[0] - self.origin[0]) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = ((p[1] - self.origin[1]) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    /// Candidate indices within `radius` of `p` (superset, sorted).
    fn candidates(&self, p: [f64; 2], radius: f64) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as isize + 1;
        let (cx, cy) = self.cell_of(p);
        let mut out = Vec::new();
        for dy in -reach..=reach {
            let y = cy as isize + dy;
            if y < 0 || y >= self.ny as isize {
                continue;
            }
            for dx in -reach..=reach {
                let x = cx as isize + dx;
                if x < 0 || x >= self.nx as isize {
                    continue;
                }
                out.extend_from_slice(&self.cells[y as usize * self.nx + x as usize]);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Factorized ordinary-kriging system for a fixed set of observation sites.
pub struct OrdinaryKriging {
    sites: Vec<[f64; 2]>,
    model: VariogramModel,
    buckets: Buckets,
    factor: EnvelopeCholesky,
    sigma_inv_one: Vec<f64>,
    one_sigma_inv_one: f64,
    covariance: SparseSymmetric,
}

impl OrdinaryKriging {
    pub fn new(sites: Vec<[f64; 2]>, model: VariogramModel) -> Result<Self> {
        model.validate()?;
        if sites.is_empty() {
            return Err(Error::InvalidParameter("no observation sites".into()));
        }
        let n = sites.len();
        let r = model.taper_range;
        let buckets = Buckets::new(&sites, r);

        if model.tau2 == 0.0 {
            let mut keyed: Vec<(u64, u64, usize)> = sites
                .iter()
                .enumerate()
                .map(|(i, s)| (s[0].to_bits(), s[1].to_bits(), i))
                .collect();
            keyed.sort_unstable();
            let dups: Vec<String> = keyed
                .windows(2)
                .filter(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
                .map(|w| format!("sites {} and {} at {:?}", w[0].2, w[1].2, sites[w[0].2]))
                .collect();
            if !dups.is_empty() {
                return Err(Error::Singular(format!(
                    "zero nugget with duplicate sites: {}",
                    dups.join(", ")
                )));
            }
        }

        let mut cov = SparseSymmetric::new(vec![model.tau2 + model.sigma2; n]);
        for i in 0..n {
            for j in buckets.candidates(sites[i], r) {
                if j <= i {
                    continue;
                }
                let h = dist(sites[i], sites[j]);
                if h < r {
                    let c = model.tapered_covariance(h);
                    if c != 0.0 {
                        cov.push(i, j, c);
                    }
                }
            }
        }
        let factor = EnvelopeCholesky::factor(&cov)?;
        let sigma_inv_one = factor.solve(&vec![1.0; n]);
        let one_sigma_inv_one: f64 = sigma_inv_one.iter().sum();
        Ok(OrdinaryKriging {
            sites,
            model,
            buckets,
            factor,
            sigma_inv_one,
            one_sigma_inv_one,
            covariance: cov,
        })
    }

    pub fn model(&self) -> &VariogramModel {
        &self.model
    }

    pub fn covariance(&self) -> &SparseSymmetric {
        &self.covariance
    }

    /// `(mu_hat, Sigma^-1 (I - mu_hat 1))` for one data vector.
    fn weights(&self, values: &[f64]) -> Result<(f64, Vec<f64>)> {
        if values.len() != self.sites.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} sites",
                values.len(),
                self.sites.len()
            )));
        }
        let z = self.factor.solve(values);
        let mu = z.iter().sum::<f64>() / self.one_sigma_inv_one;
        let w = z
            .iter()
            .zip(&self.sigma_inv_one)
            .map(|(zi, si)| zi - mu * si)
            .collect();
        Ok((mu, w))
    }

    /// Generalized least-squares mean `1' S^-1 I / 1' S^-1 1`.
    pub fn mean(&self, values: &[f64]) -> Result<f64> {
        Ok(self.weights(values)?.0)
    }

    pub fn predict(&self, values: &[f64], targets: &[[f64; 2]]) -> Result<Vec<f64>> {
        let (mu, w) = self.weights(values)?;
        let r = self.model.taper_range;
        Ok(targets
            .iter()
            .map(|&x0| {
                let mut acc = 0.0;
                for i in self.buckets.candidates(x0, r) {
                    let h = dist(x0, self.sites[i]);
                    if h < r {
                        acc += self.model.tapered_covariance(h) * w[i];
                    }
                }
                mu + acc
            })
            .collect())
    }
}

/// Kriging predictions of every image at the target lattice. Parameters are
/// shared by all images; the system is factorized once.
pub fn krige_smooth(
    series: &RasterSeries<f64>,
    model: &VariogramModel,
    targets: &TargetGrid,
) -> Result<RasterSeries<f64>> {
    let sites = TargetGrid::observed(series).sites();
    let krig = OrdinaryKriging::new(sites, *model)?;
    let target_sites = targets.sites();
    let images = series
        .images()
        .par_iter()
        .map(|img| {
            let pred = krig.predict(img.as_slice(), &target_sites)?;
            Grid::from_vec(targets.rows, targets.cols, pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = RasterSeries::new(images)?;
    out.with_pixel_spacing(targets.spacing.0, targets.spacing.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wendland_values() {
        assert_eq!(wendland_taper(0.0, 2.0), 1.0);
        assert_eq!(wendland_taper(2.0, 2.0), 0.0);
        assert_eq!(wendland_taper(5.0, 2.0), 0.0);
        assert!((wendland_taper(1.0, 2.0) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn semivariogram_at_range() {
        let m = VariogramModel::new(0.2, 1.5, 3.0);
        let expected = 0.2 + 1.5 * (1.0 - (-1.0f64).exp());
        assert!((m.semivariogram(3.0) - expected).abs() < 1e-15);
        assert!((m.semivariogram(3.0) - (0.2 + 0.632121 * 1.5)).abs() < 1e-6);
        assert_eq!(m.correlation(0.0), 1.0);
        let mut last = 0.0;
        for k in 1..50 {
            let g = m.semivariogram(k as f64 * 0.3);
            assert!(g >= last);
            last = g;
        }
    }

    fn grid_sites(n: usize) -> Vec<[f64; 2]> {
        TargetGrid { rows: n, cols: n, origin: (0.0, 0.0), spacing: (1.0, 1.0) }.sites()
    }

    #[test]
    fn exact_interpolation_without_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sites = grid_sites(6);
        let values: Vec<f64> = (0..36).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = OrdinaryKriging::new(sites.clone(), VariogramModel::new(0.0, 1.0, 2.0)).unwrap();
        let pred = k.predict(&values, &sites).unwrap();
        for (p, v) in pred.iter().zip(&values) {
            assert!((p - v).abs() < 1e-6);
        }
    }

    #[test]
    fn single_site_collapses_to_datum() {
        let k = OrdinaryKriging::new(vec![[0.0, 0.0]], VariogramModel::new(0.1, 1.0, 2.0)).unwrap();
        let pred = k.predict(&[3.25], &[[0.0, 0.0], [1.0, 0.5], [10.0, 10.0]]).unwrap();
        assert!(pred.iter().all(|&p| (p - 3.25).abs() < 1e-12));
    }

    #[test]
    fn duplicate_sites_with_zero_nugget_named() {
        let sites = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]];
        match OrdinaryKriging::new(sites, VariogramModel::new(0.0, 1.0, 1.0)) {
            Err(Error::Singular(msg)) => assert!(msg.contains("sites 0 and 2"), "{msg}"),
            other => panic!("unexpected {:?}", other.err()),
        }
    }

    #[test]
    fn predictor_is_affine_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sites = grid_sites(5);
        let values: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = [[0.5, 0.5], [2.2, 3.9], [4.0, 4.0]];
        let k = OrdinaryKriging::new(sites, VariogramModel::new(0.1, 1.0, 1.5)).unwrap();
        let base = k.predict(&values, &targets).unwrap();
        let (a, b) = (-2.5, 7.0);
        let scaled: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let pred = k.predict(&scaled, &targets).unwrap();
        for (p, q) in pred.iter().zip(&base) {
            assert!((p - (a * q + b)).abs() < 1e-8);
        }
    }

    #[test]
    fn tapered_covariance_zero_beyond_range() {
        let model = VariogramModel::new(0.1, 1.0, 1.0).with_taper_range(2.5);
        let sites = grid_sites(5);
        let k = OrdinaryKriging::new(sites.clone(), model).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                let h = dist(sites[i], sites[j]);
                let v = k.covariance().get(i, j);
                if h >= 2.5 {
                    assert_eq!(v, 0.0);
                } else {
                    assert!(v > 0.0);
                }
            }
        }
    }

    /// Dense evaluation of the same predictor with an explicit inverse.
    fn dense_predict(sites: &[[f64; 2]], model: &VariogramModel, tapered: bool, values: &[f64], targets: &[[f64; 2]]) -> Vec<f64> {
        let n = sites.len();
        let cov = |h: f64| {
            let c = model.sigma2 * model.correlation(h);
            if tapered { c * wendland_taper(h, model.taper_range) } else { c }
        };
        let sigma = DMatrix::from_fn(n, n, |i, j| cov(dist(sites[i], sites[j])) + if i == j { model.tau2 } else { 0.0 });
        let inv = sigma.try_inverse().unwrap();
        let one = DVector::from_element(n, 1.0);
        let y = DVector::from_column_slice(values);
        let mu = (one.transpose() * &inv * &y)[0] / (one.transpose() * &inv * &one)[0];
        let resid = inv * (y - one * mu);
        targets
            .iter()
            .map(|&t| mu + (0..n).map(|i| cov(dist(t, sites[i])) * resid[i]).sum::<f64>())
            .collect()
    }

    #[test]
    fn sparse_solver_matches_dense_tapered_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sites = grid_sites(8);
        let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = [[0.3, 0.7], [3.5, 3.5], [7.0, 0.0], [5.2, 6.1]];
        let model = VariogramModel::new(0.05, 1.0, 2.0);
        let k = OrdinaryKriging::new(sites.clone(), model).unwrap();
        let sparse = k.predict(&values, &targets).unwrap();
        let dense = dense_predict(&sites, &model, true, &values, &targets);
        for (a, b) in sparse.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn krige_smooth_keeps_shape_and_constant_series() {
        let s = RasterSeries::new(vec![Grid::filled(6, 6, 4.0); 3]).unwrap();
        let out = krige_smooth(&s, &VariogramModel::new(0.1, 1.0, 2.0), &TargetGrid::observed(&s)).unwrap();
        assert_eq!((out.len(), out.rows(), out.cols()), (3, 6, 6));
        assert!(out.images().iter().all(|g| g.as_slice().iter().all(|v| (v - 4.0).abs() < 1e-10)));
    }
}
