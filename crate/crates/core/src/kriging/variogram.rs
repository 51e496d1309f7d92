use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterSeries;
use crate::rng::{stream_id, stream_rng};

use super::optimize::NelderMead;
use super::VariogramModel;

/// Binned semivariogram pooled over all images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    /// Mean pair distance of each bin.
    pub bin_centers: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramConfig {
    pub max_lag: f64,
    pub n_bins: usize,
    /// Maximum number of sites entering the pair enumeration.
    pub subsample: usize,
    pub seed: u64,
}

impl Default for VariogramConfig {
    fn default() -> Self {
        VariogramConfig {
            max_lag: 10.0,
            n_bins: 15,
            subsample: 600,
            seed: 0,
        }
    }
}

/// `gamma(bin) = mean_m 1/2 mean{(I_m(x_i) - I_m(x_j))^2 : |x_i - x_j| in bin}`.
/// Bins without pairs are dropped.
pub fn empirical_variogram(series: &RasterSeries<f64>, cfg: &VariogramConfig) -> Result<EmpiricalVariogram> {
    if !(cfg.max_lag > 0.0) || cfg.n_bins == 0 || cfg.subsample < 2 {
        return Err(Error::InvalidParameter(format!(
            "variogram needs max_lag > 0, n_bins >= 1, subsample >= 2; got {cfg:?}"
        )));
    }
    let (rows, cols) = (series.rows(), series.cols());
    let (dx, dy) = series.pixel_spacing();
    let n = rows * cols;
    let mut sites: Vec<usize> = if n > cfg.subsample {
        let mut rng = stream_rng(cfg.seed, stream_id(7, 0));
        sample(&mut rng, n, cfg.subsample).into_vec()
    } else {
        (0..n).collect()
    };
    sites.sort_unstable();
    let pos = |s: usize| ((s % cols) as f64 * dx, (s / cols) as f64 * dy);

    let nb = cfg.n_bins;
    let mut counts = vec![0usize; nb];
    let mut dist_sum = vec![0.0; nb];
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (a, &sa) in sites.iter().enumerate() {
        let (xa, ya) = pos(sa);
        for &sb in &sites[a + 1..] {
            let (xb, yb) = pos(sb);
            let h = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt();
            if h > 0.0 && h <= cfg.max_lag {
                let b = ((h / cfg.max_lag * nb as f64) as usize).min(nb - 1);
                counts[b] += 1;
                dist_sum[b] += h;
                pairs.push((sa, sb, b));
            }
        }
    }
    let mut gamma = vec![0.0; nb];
    for img in series.images() {
        let v = img.as_slice();
        let mut acc = vec![0.0; nb];
        for &(a, b, bin) in &pairs {
            acc[bin] += (v[a] - v[b]).powi(2);
        }
        for k in 0..nb {
            if counts[k] > 0 {
                gamma[k] += 0.5 * acc[k] / counts[k] as f64;
            }
        }
    }
    let m = series.len() as f64;
    let keep: Vec<usize> = (0..nb).filter(|&k| counts[k] > 0).collect();
    Ok(EmpiricalVariogram {
        bin_centers: keep.iter().map(|&k| dist_sum[k] / counts[k] as f64).collect(),
        gamma_hat: keep.iter().map(|&k| gamma[k] / m).collect(),
        counts: keep.iter().map(|&k| counts[k]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    pub contrast_value: f64,
    pub iterations: usize,
}

/// Weighted least-squares contrast `sum_b n_b (gamma_b - gamma(h_b))^2`.
pub fn contrast(ev: &EmpiricalVariogram, model: &VariogramModel) -> f64 {
    ev.bin_centers
        .iter()
        .zip(&ev.gamma_hat)
        .zip(&ev.counts)
        .map(|((&h, &g), &n)| n as f64 * (g - model.semivariogram(h)).powi(2))
        .sum()
}

/// Minimum-contrast fit of the exponential model by bounded Nelder–Mead with
/// restarts. The taper range defaults to `3 theta`.
pub fn fit_variogram(ev: &EmpiricalVariogram) -> Result<VariogramFit> {
    if ev.bin_centers.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "variogram fit needs at least 3 nonempty bins, got {}",
            ev.bin_centers.len()
        )));
    }
    let h_max = ev.bin_centers.iter().copied().fold(0.0, f64::max);
    let h_min = ev.bin_centers.iter().copied().fold(f64::INFINITY, f64::min);
    let g_max = ev.gamma_hat.iter().copied().fold(0.0, f64::max);
    let g_min = ev.gamma_hat.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let scale = g_max.max(f64::MIN_POSITIVE);
    let weight: f64 = ev.counts.iter().map(|&c| c as f64).sum();

    // Normalised parameters: (tau2 / scale, sigma2 / scale, theta / h_max).
    let to_model = |x: &[f64]| VariogramModel {
        tau2: x[0] * scale,
        sigma2: x[1] * scale,
        theta: x[2] * h_max,
        taper_range: 3.0 * x[2] * h_max,
    };
    let objective = |x: &[f64]| contrast(ev, &to_model(x)) / (weight * scale * scale);
    let nm = NelderMead {
        lower: vec![0.0, 1e-12, (h_min / h_max) * 1e-3],
        upper: vec![10.0, 10.0, 100.0],
        max_iter: 4000,
        ftol: 1e-22,
    };
    let mut x = vec![
        0.5 * g_min / scale,
        ((g_max - 0.5 * g_min) / scale).max(1e-3),
        1.0 / 3.0,
    ];
    let mut best = nm.minimize(&objective, &x, &[0.1, 0.2, 0.2]);
    let initial = best.initial_value;
    let mut iterations = best.iterations;
    for _ in 0..20 {
        x = best.x.clone();
        let step: Vec<f64> = x.iter().map(|v| (0.1 * v.abs()).max(1e-4)).collect();
        let next = nm.minimize(&objective, &x, &step);
        iterations += next.iterations;
        let improved = next.value < best.value * (1.0 - 1e-12);
        if next.value <= best.value {
            best = next;
        }
        if !improved {
            break;
        }
    }
    if !best.value.is_finite() || (best.value >= initial && initial > 1e-24) {
        return Err(Error::Optimizer(format!(
            "no improvement on the initial simplex (contrast {:e})",
            best.value * weight * scale * scale
        )));
    }
    let model = to_model(&best.x);
    Ok(VariogramFit {
        contrast_value: contrast(ev, &model),
        model,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn exact(model: &VariogramModel, bins: usize) -> EmpiricalVariogram {
        let h: Vec<f64> = (1..=bins).map(|b| b as f64).collect();
        EmpiricalVariogram {
            gamma_hat: h.iter().map(|&x| model.semivariogram(x)).collect(),
            bin_centers: h,
            counts: vec![10; bins],
        }
    }

    #[test]
    fn constant_image_zero_variogram() {
        let s = RasterSeries::new(vec![Grid::filled(6, 6, 2.0); 2]).unwrap();
        let ev = empirical_variogram(&s, &VariogramConfig { max_lag: 4.0, n_bins: 4, ..Default::default() }).unwrap();
        assert_eq!(ev.gamma_hat.len(), 3);
        assert!(ev.gamma_hat.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn two_pixel_example() {
        let s = RasterSeries::new(vec![Grid::from_rows(&[vec![0.0, 2.0]]).unwrap(); 2]).unwrap();
        let ev = empirical_variogram(&s, &VariogramConfig { max_lag: 1.5, n_bins: 3, ..Default::default() }).unwrap();
        assert_eq!(ev.counts, vec![1]);
        assert_eq!(ev.gamma_hat, vec![2.0]);
        assert_eq!(ev.bin_centers, vec![1.0]);
    }

    #[test]
    fn white_noise_variogram_is_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = Normal::new(0.0, 1.0).unwrap();
        let images = (0..4).map(|_| Grid::from_fn(40, 40, |_, _| n.sample(&mut rng))).collect();
        let s = RasterSeries::new(images).unwrap();
        let cfg = VariogramConfig { max_lag: 8.0, n_bins: 8, subsample: 1600, seed: 1 };
        let ev = empirical_variogram(&s, &cfg).unwrap();
        for &g in &ev.gamma_hat {
            assert!((g - 1.0).abs() < 0.05, "{g}");
        }
    }

    #[test]
    fn subsampling_is_seeded() {
        let s = RasterSeries::new(vec![Grid::from_fn(20, 20, |i, j| (i * j) as f64 % 7.0); 2]).unwrap();
        let cfg = VariogramConfig { max_lag: 5.0, n_bins: 5, subsample: 50, seed: 3 };
        assert_eq!(empirical_variogram(&s, &cfg).unwrap(), empirical_variogram(&s, &cfg).unwrap());
    }

    #[test]
    fn self_consistent_fit_recovers_parameters() {
        let truth = VariogramModel::new(0.1, 1.0, 5.0);
        let fit = fit_variogram(&exact(&truth, 20)).unwrap();
        let m = fit.model;
        assert!((m.tau2 - 0.1).abs() / 0.1 < 0.01, "{m:?}");
        assert!((m.sigma2 - 1.0).abs() < 0.01, "{m:?}");
        assert!((m.theta - 5.0).abs() / 5.0 < 0.01, "{m:?}");
        assert!((m.taper_range - 3.0 * m.theta).abs() < 1e-12);
    }

    #[test]
    fn constant_variogram_fits_pure_nugget() {
        let ev = EmpiricalVariogram {
            bin_centers: (1..=10).map(|b| b as f64).collect(),
            gamma_hat: vec![0.7; 10],
            counts: vec![5; 10],
        };
        let fit = fit_variogram(&ev).unwrap();
        assert!(fit.contrast_value < 1e-8, "{fit:?}");
    }

    #[test]
    fn too_few_bins() {
        let ev = EmpiricalVariogram { bin_centers: vec![1.0, 2.0], gamma_hat: vec![1.0, 1.0], counts: vec![1, 1] };
        assert!(fit_variogram(&ev).is_err());
    }
}
