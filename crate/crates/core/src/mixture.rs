//! Two-population mixture function estimated by wavelet regression.
//!
//! Observations `Y_t` come from population `U` with probability `rho(t)` and
//! from `V` otherwise. With the group means known, `W_t = (Y_t - mu_V) /
//! (mu_U - mu_V)` has expectation `rho(t)`, so `rho` is recovered by
//! smoothing `W` on an equally spaced grid. Valleys of `rho` mark times where
//! the `V` population dominates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mad, soft_threshold, Scalar};
use crate::wavelet::{dwt1, idwt1, WaveletSpec};

/// Which of the two clusters plays the role of `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelConvention {
    /// The cluster with the larger mean.
    #[default]
    LargerMean,
    /// The more populous cluster (ties go to the larger mean).
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionThreshold {
    /// `MAD(d_1)/0.6745 * sqrt(2 ln n)` from the finest level, used at every level.
    Universal,
    /// Per-level `MAD(d_j)/0.6745 * sqrt(2 ln n)`.
    LevelMad,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureOptions {
    pub valley_threshold: f64,
    pub convention: LabelConvention,
    pub threshold: RegressionThreshold,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        MixtureOptions {
            valley_threshold: 0.5,
            convention: LabelConvention::LargerMean,
            threshold: RegressionThreshold::Universal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureResult<T> {
    /// Estimated mixture function on the dyadic grid, clipped to `[0, 1]`.
    pub rho: Vec<T>,
    /// Grid points `t_i = i / (n - 1)`.
    pub grid: Vec<T>,
    pub mu_u: T,
    pub mu_v: T,
    /// `true` where the observation was assigned to `U`; one per input.
    pub group_labels: Vec<bool>,
    /// Input time indices of the valleys of `rho` below the threshold.
    pub valleys: Vec<usize>,
}

/// Scalar 2-means started at the extremes; returns `true` for the
/// upper cluster. Deterministic.
pub fn two_means<T: Scalar>(values: &[T]) -> Result<Vec<bool>> {
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    if values.is_empty() || !(hi > lo) {
        return Err(Error::Degenerate(
            "loadings are all equal; clusters are degenerate".into(),
        ));
    }
    let (mut c_lo, mut c_hi) = (lo, hi);
    let mut labels: Vec<bool> = Vec::new();
    for _ in 0..1000 {
        let new: Vec<bool> = values
            .iter()
            .map(|&v| (v - c_hi).abs() < (v - c_lo).abs())
            .collect();
        if new == labels {
            break;
        }
        labels = new;
        let mean_of = |flag: bool| {
            let (s, n) = values
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == flag)
                .fold((T::zero(), 0usize), |(s, n), (&v, _)| (s + v, n + 1));
            (n > 0).then(|| s / T::from_usize_lossy(n))
        };
        match (mean_of(false), mean_of(true)) {
            (Some(a), Some(b)) => {
                c_lo = a;
                c_hi = b;
            }
            _ => break,
        }
    }
    Ok(labels)
}

/// Group means and `W_t` for a given labelling (`true` = `U`).
pub fn mixture_weights<T: Scalar>(values: &[T], labels: &[bool]) -> Result<(Vec<T>, T, T)> {
    if values.len() != labels.len() {
        return Err(Error::Dimension("labels and values differ in length".into()));
    }
    let mean_of = |flag: bool| -> Option<T> {
        let sel: Vec<T> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == flag)
            .map(|(&v, _)| v)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().copied().sum::<T>() / T::from_usize_lossy(sel.len()))
    };
    let (mu_u, mu_v) = match (mean_of(true), mean_of(false)) {
        (Some(u), Some(v)) if u != v => (u, v),
        _ => {
            return Err(Error::Degenerate(
                "group means must exist and differ".into(),
            ))
        }
    };
    let w = values.iter().map(|&y| (y - mu_v) / (mu_u - mu_v)).collect();
    Ok((w, mu_u, mu_v))
}

/// Nearest-neighbour resampling of `w` onto `n` equally spaced points.
fn resample<T: Scalar>(w: &[T], n: usize) -> Vec<T> {
    if w.len() == n {
        return w.to_vec();
    }
    (0..n).map(|g| w[grid_to_time(g, n, w.len())]).collect()
}

pub(crate) fn grid_to_time(g: usize, n: usize, m: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    ((g as f64) * (m as f64 - 1.0) / (n as f64 - 1.0)).round() as usize
}

/// Wavelet regression of `w` on an equally spaced dyadic grid; `w.len()`
/// must be a power of two. The output is clipped to `[0, 1]`.
pub fn wavelet_regression<T: Scalar>(
    w: &[T],
    spec: &WaveletSpec,
    threshold: RegressionThreshold,
) -> Result<Vec<T>> {
    let n = w.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "regression grid length {n} is not a power of two"
        )));
    }
    let levels = spec.levels.min(n.trailing_zeros() as usize).max(1);
    let spec = WaveletSpec { levels, ..*spec };
    let mut coeffs = dwt1(w, &spec)?;
    let scale = (T::lit(2.0) * T::from_usize_lossy(n).ln()).sqrt();
    let universal = mad(&coeffs.details[0]) / T::lit(0.6745) * scale;
    for d in &mut coeffs.details {
        let lambda = match threshold {
            RegressionThreshold::Universal => universal,
            RegressionThreshold::LevelMad => mad(d) / T::lit(0.6745) * scale,
            RegressionThreshold::Explicit(l) if l >= 0.0 => T::lit(l),
            RegressionThreshold::Explicit(l) => {
                return Err(Error::InvalidParameter(format!("negative threshold {l}")))
            }
        };
        d.iter_mut().for_each(|c| *c = soft_threshold(*c, lambda));
    }
    let rho = idwt1(&coeffs, &spec)?;
    Ok(rho.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect())
}

/// Indices of local minima below `threshold`. A plateau of equal values
/// counts once, at its centre, when both neighbours (where present) are higher.
pub fn find_valleys<T: Scalar>(rho: &[T], threshold: T) -> Vec<usize> {
    let n = rho.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && rho[end + 1] == rho[start] {
            end += 1;
        }
        let v = rho[start];
        let left_ok = start == 0 || rho[start - 1] > v;
        let right_ok = end + 1 == n || rho[end + 1] > v;
        let interior = start > 0 || end + 1 < n;
        if v < threshold && left_ok && right_ok && interior {
            out.push((start + end) / 2);
        }
        start = end + 1;
    }
    out
}

fn dyadic_len(m: usize) -> usize {
    m.next_power_of_two()
}

/// Estimates the mixture function from a scalar series, clustering it into
/// two groups first.
pub fn estimate_mixture<T: Scalar>(
    loadings: &[T],
    spec: &WaveletSpec,
    opts: &MixtureOptions,
) -> Result<MixtureResult<T>> {
    if loadings.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "mixture estimation needs at least 8 observations, got {}",
            loadings.len()
        )));
    }
    let upper = two_means(loadings)?;
    let labels = match opts.convention {
        LabelConvention::LargerMean => upper,
        LabelConvention::Majority => {
            let n_upper = upper.iter().filter(|&&l| l).count();
            if 2 * n_upper >= upper.len() {
                upper
            } else {
                upper.iter().map(|&l| !l).collect()
            }
        }
    };
    estimate_mixture_with_labels(loadings, &labels, spec, opts)
}

/// As [`estimate_mixture`] with a caller-supplied labelling (`true` = `U`).
pub fn estimate_mixture_with_labels<T: Scalar>(
    loadings: &[T],
    labels: &[bool],
    spec: &WaveletSpec,
    opts: &MixtureOptions,
) -> Result<MixtureResult<T>> {
    let m = loadings.len();
    let (w, mu_u, mu_v) = mixture_weights(loadings, labels)?;
    let n = dyadic_len(m);
    let rho = wavelet_regression(&resample(&w, n), spec, opts.threshold)?;
    let mut valleys: Vec<usize> = find_valleys(&rho, T::lit(opts.valley_threshold))
        .into_iter()
        .map(|g| grid_to_time(g, n, m))
        .collect();
    valleys.dedup();
    let grid = (0..n)
        .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy((n - 1).max(1)))
        .collect();
    Ok(MixtureResult {
        rho,
        grid,
        mu_u,
        mu_v,
        group_labels: labels.to_vec(),
        valleys,
    })
}

/// Pointwise mean of several mixture functions, clipped to `[0, 1]`.
pub fn mean_mixture<T: Scalar>(results: &[MixtureResult<T>]) -> Result<Vec<T>> {
    let curves: Vec<&[T]> = results.iter().map(|r| r.rho.as_slice()).collect();
    mean_curves(&curves)
}

pub fn mean_curves<T: Scalar>(curves: &[&[T]]) -> Result<Vec<T>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidParameter("no mixture functions to average".into()))?;
    let n = first.len();
    if curves.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("mixture functions differ in length".into()));
    }
    let k = T::from_usize_lossy(curves.len());
    Ok((0..n)
        .map(|i| {
            let s: T = curves.iter().map(|c| c[i]).sum();
            (s / k).max(T::zero()).min(T::one())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::WaveletFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn spec() -> WaveletSpec {
        WaveletSpec::new(WaveletFamily::Haar, 3)
    }

    #[test]
    fn two_means_splits_obvious_groups() {
        let v = [0.0, 0.1, 5.0, 5.2, 0.05, 4.9];
        assert_eq!(two_means(&v).unwrap(), vec![false, false, true, true, false, true]);
        assert!(two_means(&[1.0; 5]).is_err());
    }

    #[test]
    fn forced_all_u_gives_constant_one() {
        let y: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        // W depends on the group means only through the labelling.
        let (w, _, _) = mixture_weights(&y, &y.iter().map(|&v| v > 0.5).collect::<Vec<_>>()).unwrap();
        assert_eq!(w, y);
        let ones = vec![1.0_f64; 16];
        let rho = wavelet_regression(&ones, &spec(), RegressionThreshold::LevelMad).unwrap();
        assert!(rho.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert!(find_valleys(&rho, 0.5).is_empty());
    }

    #[test]
    fn zero_threshold_interpolates() {
        let y: Vec<f64> = (0..32).map(|i| ((i * 7) % 5) as f64).collect();
        let opts = MixtureOptions {
            threshold: RegressionThreshold::Explicit(0.0),
            ..Default::default()
        };
        let r = estimate_mixture(&y, &WaveletSpec::new(WaveletFamily::Daubechies4, 3), &opts).unwrap();
        let (w, _, _) = mixture_weights(&y, &r.group_labels).unwrap();
        for (a, b) in r.rho.iter().zip(&w) {
            assert!((a - b.clamp(0.0, 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn label_swap_reflects_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let y: Vec<f64> = (0..64)
            .map(|i| if (20..30).contains(&i) { 0.0 } else { 1.0 } + noise.sample(&mut rng))
            .collect();
        let s = WaveletSpec::new(WaveletFamily::Daubechies4, 3);
        let opts = MixtureOptions::default();
        let a = estimate_mixture(&y, &s, &opts).unwrap();
        let flipped: Vec<bool> = a.group_labels.iter().map(|&l| !l).collect();
        let b = estimate_mixture_with_labels(&y, &flipped, &s, &opts).unwrap();
        for (x, z) in a.rho.iter().zip(&b.rho) {
            assert!((x + z - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = (0..40).map(|i| (i / 10) as f64 % 2.0 + noise.sample(&mut rng)).collect();
        let s = spec();
        let a = estimate_mixture(&y, &s, &MixtureOptions::default()).unwrap();
        let z: Vec<f64> = y.iter().map(|v| 3.5 * v - 7.0).collect();
        let b = estimate_mixture(&z, &s, &MixtureOptions::default()).unwrap();
        for (x, w) in a.rho.iter().zip(&b.rho) {
            assert!((x - w).abs() < 1e-10);
        }
        assert_eq!(a.valleys, b.valleys);
    }

    #[test]
    fn majority_convention_makes_rare_group_v() {
        let mut y = vec![0.0_f64; 32];
        y[10] = 5.0;
        y[11] = 5.0;
        let opts = MixtureOptions {
            convention: LabelConvention::Majority,
            ..Default::default()
        };
        let r = estimate_mixture(&y, &spec(), &opts).unwrap();
        assert_eq!(r.mu_u, 0.0);
        assert_eq!(r.mu_v, 5.0);
        assert!(r.valleys.iter().any(|&v| (10..=11).contains(&v)));
    }

    #[test]
    fn valleys_on_plateaus_and_edges() {
        assert_eq!(find_valleys(&[1.0, 0.2, 0.2, 0.2, 1.0], 0.5), vec![2]);
        assert_eq!(find_valleys(&[0.1, 0.9, 0.3, 0.9], 0.5), vec![0, 2]);
        assert!(find_valleys(&[0.1, 0.1, 0.1], 0.5).is_empty());
    }

    #[test]
    fn mean_mixture_examples() {
        assert_eq!(mean_curves(&[&[0.2, 0.4][..]]).unwrap(), vec![0.2, 0.4]);
        assert_eq!(mean_curves(&[&[0.0; 3][..], &[1.0; 3][..]]).unwrap(), vec![0.5; 3]);
        assert_eq!(mean_curves(&[&[0.3; 4][..]; 5]).unwrap(), vec![0.3; 4]);
        assert!(mean_curves(&[&[0.0; 3][..], &[1.0; 2][..]]).is_err());
        assert!(mean_curves::<f64>(&[]).is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(estimate_mixture(&[0.0, 1.0, 0.0, 1.0], &spec(), &MixtureOptions::default()).is_err());
    }

    #[test]
    fn resampling_to_dyadic_length() {
        let y: Vec<f64> = (0..12).map(|i| if i == 6 { 0.0 } else { 1.0 }).collect();
        let r = estimate_mixture(&y, &spec(), &MixtureOptions::default()).unwrap();
        assert_eq!(r.rho.len(), 16);
        assert_eq!(r.group_labels.len(), 12);
    }
}
