//! Square-root density estimation on a dyadic histogram grid and Hellinger
//! distances computed directly from coefficient vectors.
//!
//! A density on `[a, b]` is represented by `2^J0` scaling coefficients
//! `alpha_k` of `sqrt(f)` against the box functions
//! `phi_k = w^{-1/2} 1[a + k w, a + (k+1) w)`, `w = (b - a) / 2^J0`.
//! Because the boxes are orthonormal, `int f = |alpha|^2` and
//! `int (sqrt f - sqrt g)^2 = |alpha_f - alpha_g|^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{l2_norm, soft_threshold, Scalar};
use crate::wavelet::{dwt1, idwt1, WaveletSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtDensity<T> {
    coeffs: Vec<T>,
    support: (T, T),
    resolution: usize,
    basis: WaveletSpec,
}

impl<T: Scalar> SqrtDensity<T> {
    /// Builds a density from raw coefficients, normalizing them to unit norm.
    pub fn from_coeffs(
        coeffs: Vec<T>,
        support: (T, T),
        resolution: usize,
        basis: WaveletSpec,
    ) -> Result<Self> {
        check_support(support)?;
        if coeffs.len() != 1usize << resolution {
            return Err(Error::Dimension(format!(
                "{} coefficients for resolution {resolution}",
                coeffs.len()
            )));
        }
        let norm = l2_norm(&coeffs);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::Degenerate("coefficient vector has zero norm".into()));
        }
        Ok(SqrtDensity {
            coeffs: coeffs.into_iter().map(|c| c / norm).collect(),
            support,
            resolution,
            basis,
        })
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn support(&self) -> (T, T) {
        self.support
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn basis(&self) -> &WaveletSpec {
        &self.basis
    }

    pub fn bin_width(&self) -> T {
        (self.support.1 - self.support.0) / T::from_usize_lossy(self.coeffs.len())
    }

    /// `sqrt(f)(x)`, signed as the coefficient; zero outside the support.
    pub fn sqrt_eval(&self, x: T) -> T {
        match bin_index(x, self.support, self.coeffs.len(), false) {
            Some(k) => self.coeffs[k] / self.bin_width().sqrt(),
            None => T::zero(),
        }
    }

    /// Density estimate `f(x) = sqrt_eval(x)^2`.
    pub fn eval(&self, x: T) -> T {
        let s = self.sqrt_eval(x);
        s * s
    }

    fn compatible(&self, other: &Self) -> bool {
        self.support == other.support && self.resolution == other.resolution && self.basis == other.basis
    }
}

fn check_support<T: Scalar>((a, b): (T, T)) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degenerate support ({a}, {b})"
        )));
    }
    Ok(())
}

/// Bin of `x` among `bins` equal cells of `[a, b]`. With `clip`, values
/// outside the support are assigned to the boundary cells.
fn bin_index<T: Scalar>(x: T, (a, b): (T, T), bins: usize, clip: bool) -> Option<usize> {
    if !clip && (x < a || x > b) {
        return None;
    }
    let pos = ((x - a) / (b - a) * T::from_usize_lossy(bins)).floor();
    let k = if pos <= T::zero() {
        0
    } else {
        pos.to_usize().unwrap_or(bins - 1).min(bins - 1)
    };
    Some(k)
}

/// Histogram square-root estimator with optional wavelet shrinkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimator {
    /// `J0`: the grid has `2^J0` cells.
    pub resolution: usize,
    pub basis: WaveletSpec,
    /// Soft-threshold detail coefficients of the root histogram.
    pub shrink: bool,
}

impl Default for DensityEstimator {
    fn default() -> Self {
        DensityEstimator {
            resolution: 6,
            basis: WaveletSpec::haar(3),
            shrink: false,
        }
    }
}

impl DensityEstimator {
    pub fn new(resolution: usize, basis: WaveletSpec) -> Self {
        DensityEstimator {
            resolution,
            basis,
            shrink: false,
        }
    }

    pub fn with_shrinkage(mut self, shrink: bool) -> Self {
        self.shrink = shrink;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution > 20 {
            return Err(Error::InvalidParameter(format!(
                "density resolution must be in 1..=20, got {}",
                self.resolution
            )));
        }
        self.basis.validate()
    }

    pub fn estimate<T: Scalar>(&self, sample: &[T], support: (T, T)) -> Result<SqrtDensity<T>> {
        self.validate()?;
        check_support(support)?;
        if sample.is_empty() {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        let bins = 1usize << self.resolution;
        let mut counts = vec![0usize; bins];
        for &x in sample {
            if let Some(k) = bin_index(x, support, bins, true) {
                counts[k] += 1;
            }
        }
        let n = T::from_usize_lossy(sample.len());
        let mut coeffs: Vec<T> = counts
            .iter()
            .map(|&c| (T::from_usize_lossy(c) / n).sqrt())
            .collect();

        if self.shrink {
            let levels = self.basis.levels.min(self.resolution);
            let spec = WaveletSpec { levels, ..self.basis };
            let mut w = dwt1(&coeffs, &spec)?;
            // sqrt of a binomial proportion has standard deviation ~ 1 / (2 sqrt n)
            let sigma = T::lit(0.5) / n.sqrt();
            let lambda = sigma * (T::lit(2.0) * T::from_usize_lossy(bins).ln()).sqrt();
            for d in &mut w.details {
                d.iter_mut().for_each(|c| *c = soft_threshold(*c, lambda));
            }
            coeffs = idwt1(&w, &spec)?;
            coeffs.iter_mut().for_each(|c| *c = c.max(T::zero()));
        }

        SqrtDensity::from_coeffs(coeffs, support, self.resolution, self.basis)
    }
}

pub fn estimate_sqrt_density<T: Scalar>(
    sample: &[T],
    support: (T, T),
    resolution: usize,
    basis: WaveletSpec,
) -> Result<SqrtDensity<T>> {
    DensityEstimator::new(resolution, basis).estimate(sample, support)
}

/// Hellinger distance between unit-normalized coefficient vectors,
/// `(1/sqrt 2) * |p/|p| - q/|q||`. Vectors of zero norm are rejected.
pub fn hellinger_coeffs<T: Scalar>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "coefficient vectors of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let (np, nq) = (l2_norm(p), l2_norm(q));
    if !(np > T::zero() && nq > T::zero()) {
        return Err(Error::Degenerate("zero-norm coefficient vector".into()));
    }
    let sq: T = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let d = a / np - b / nq;
            d * d
        })
        .sum();
    Ok((sq / T::lit(2.0)).sqrt())
}

pub fn hellinger<T: Scalar>(p: &SqrtDensity<T>, q: &SqrtDensity<T>) -> Result<T> {
    if !p.compatible(q) {
        return Err(Error::InvalidParameter(
            "densities differ in support, resolution or basis".into(),
        ));
    }
    hellinger_coeffs(&p.coeffs, &q.coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_concentrates_in_one_cell() {
        let sample = vec![0.5_f64; 4096];
        let d = estimate_sqrt_density(&sample, (0.0, 1.0), 3, WaveletSpec::haar(1)).unwrap();
        assert_eq!(d.coeffs()[4], 1.0);
        assert_eq!(d.coeffs().iter().filter(|&&c| c != 0.0).count(), 1);
        assert!(d.eval(0.55) > 0.0);
        assert_eq!(d.eval(0.45), 0.0);
    }

    #[test]
    fn out_of_support_samples_are_clipped() {
        let d = estimate_sqrt_density(&[-5.0_f64, 5.0], (0.0, 1.0), 2, WaveletSpec::haar(1)).unwrap();
        let c = d.coeffs();
        assert!((c[0] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((c[3] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.eval(-1.0), 0.0);
    }

    #[test]
    fn errors() {
        let b = WaveletSpec::haar(1);
        assert!(estimate_sqrt_density::<f64>(&[], (0.0, 1.0), 3, b).is_err());
        assert!(estimate_sqrt_density(&[0.1_f64], (1.0, 1.0), 3, b).is_err());
        assert!(estimate_sqrt_density(&[0.1_f64], (2.0, 1.0), 3, b).is_err());
    }

    #[test]
    fn unit_norm_with_and_without_shrinkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample: Vec<f64> = (0..500).map(|_| rng.random::<f64>().powi(2)).collect();
        for shrink in [false, true] {
            for family in WaveletFamily::ALL {
                let est = DensityEstimator::new(6, WaveletSpec::new(family, 3)).with_shrinkage(shrink);
                let d = est.estimate(&sample, (0.0, 1.0)).unwrap();
                assert!((l2_norm(d.coeffs()) - 1.0).abs() < 1e-12);
                assert!(d.coeffs().iter().all(|&c| c >= 0.0));
            }
        }
    }

    #[test]
    fn hellinger_examples() {
        let b = WaveletSpec::haar(1);
        let e1 = SqrtDensity::<f64>::from_coeffs(vec![1.0, 0.0], (0.0, 1.0), 1, b).unwrap();
        let e2 = SqrtDensity::from_coeffs(vec![0.0, 1.0], (0.0, 1.0), 1, b).unwrap();
        let mid = SqrtDensity::from_coeffs(vec![1.0, 1.0], (0.0, 1.0), 1, b).unwrap();
        assert_eq!(hellinger(&e1, &e1).unwrap(), 0.0);
        assert!((hellinger(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        // oracle: sqrt(1 - <a, b>) for unit vectors
        let expected = (1.0 - 1.0 / 2f64.sqrt()).sqrt();
        assert!((hellinger(&e1, &mid).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.541196).abs() < 1e-6);
    }

    #[test]
    fn hellinger_rejects_mismatched_grids() {
        let b = WaveletSpec::haar(1);
        let p = SqrtDensity::from_coeffs(vec![1.0, 0.0], (0.0, 1.0), 1, b).unwrap();
        let q = SqrtDensity::from_coeffs(vec![1.0, 0.0], (0.0, 2.0), 1, b).unwrap();
        let r = SqrtDensity::from_coeffs(vec![1.0, 0.0, 0.0, 0.0], (0.0, 1.0), 2, b).unwrap();
        assert!(hellinger(&p, &q).is_err());
        assert!(hellinger(&p, &r).is_err());
    }

    #[test]
    fn affine_rescaling_preserves_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..2000).map(|_| rng.random::<f64>().sqrt()).collect();
        let b = WaveletSpec::haar(2);
        let base = hellinger(
            &estimate_sqrt_density(&xs, (0.0, 1.0), 5, b).unwrap(),
            &estimate_sqrt_density(&ys, (0.0, 1.0), 5, b).unwrap(),
        )
        .unwrap();
        let (s, t) = (4.0, -3.0);
        let tx: Vec<f64> = xs.iter().map(|x| s * x + t).collect();
        let ty: Vec<f64> = ys.iter().map(|y| s * y + t).collect();
        let pa = estimate_sqrt_density(&tx, (t, s + t), 5, b).unwrap();
        let pb = estimate_sqrt_density(&ty, (t, s + t), 5, b).unwrap();
        assert!((hellinger(&pa, &pb).unwrap() - base).abs() < 1e-6);
        // density values pick up the Jacobian 1/s
        let orig = estimate_sqrt_density(&xs, (0.0, 1.0), 5, b).unwrap();
        assert!((pa.eval(s * 0.3 + t) - orig.eval(0.3) / s).abs() < 1e-9);
    }
}
