//! Shared stages of the change-detection pipeline: preprocessing, subband
//! transforms, per-subband square-root densities and their reduced
//! functional models.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityEstimator;
use crate::error::{Error, Result};
use crate::functional::{estimate_dimension, reconstruct, CurveSeries, DimensionConfig, FunctionalModel};
use crate::mixture::{estimate_mixture, find_valleys, mean_curves, MixtureOptions, MixtureResult};
use crate::kriging::{empirical_variogram, fit_variogram, krige_smooth, TargetGrid, VariogramConfig, VariogramModel};
use crate::raster::{log_transform, RasterSeries};
use crate::wavelet::{dwt2, soft_threshold_denoise, swt2, Subband, SubbandCoeffs, Threshold, TransformKind, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigingSmoother {
    pub variogram: VariogramConfig,
    /// Replaces the fitted default of `3 theta`.
    pub taper_range: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoother {
    None,
    /// Decimated-transform soft thresholding with the pipeline's wavelet.
    WaveletThreshold(Threshold),
    Kriging(KrigingSmoother),
}

/// How the density curve series of each subband is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reduction {
    /// Bootstrap-tested dimension.
    Bootstrap,
    /// Fixed number of leading eigenfunctions.
    Fixed(usize),
    /// Raw density coefficients.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `Some(offset)` applies `ln(v + offset)` first.
    pub log_offset: Option<f64>,
    pub smoother: Smoother,
    pub transform: TransformKind,
    pub wavelet: WaveletSpec,
    pub density: DensityEstimator,
    pub subbands: Vec<Subband>,
    /// Detail levels pooled per orientation; `None` pools all of them.
    pub detail_levels: Option<Vec<usize>>,
    pub reduction: Reduction,
    pub dimension: DimensionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            log_offset: None,
            smoother: Smoother::None,
            transform: TransformKind::Stationary,
            wavelet: WaveletSpec::haar(2),
            density: DensityEstimator::new(5, WaveletSpec::haar(3)),
            subbands: Subband::ALL.to_vec(),
            detail_levels: None,
            reduction: Reduction::Bootstrap,
            dimension: DimensionConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        self.wavelet.validate()?;
        self.density.validate()?;
        if let Some(o) = self.log_offset {
            if !(o >= 0.0 && o.is_finite()) {
                return Err(Error::InvalidParameter(format!("log offset must be non-negative, got {o}")));
            }
        }
        if self.subbands.is_empty() {
            return Err(Error::InvalidParameter("no subbands selected".into()));
        }
        let mut seen = self.subbands.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.subbands.len() {
            return Err(Error::InvalidParameter("duplicate subband in selection".into()));
        }
        if let Some(levels) = &self.detail_levels {
            if levels.is_empty() || levels.iter().any(|&l| l == 0 || l > self.wavelet.levels) {
                return Err(Error::InvalidParameter(format!(
                    "detail levels {levels:?} must lie in 1..={}",
                    self.wavelet.levels
                )));
            }
        }
        match self.smoother {
            Smoother::WaveletThreshold(Threshold::Explicit(l)) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::InvalidParameter(format!("negative smoothing threshold {l}")))
            }
            Smoother::Kriging(k) => {
                if let Some(r) = k.taper_range {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(Error::InvalidParameter(format!("taper range must be positive, got {r}")));
                    }
                }
            }
            _ => {}
        }
        if let Reduction::Fixed(0) = self.reduction {
            return Err(Error::InvalidParameter("fixed dimension must be at least 1".into()));
        }
        Ok(())
    }

    fn levels(&self) -> Vec<usize> {
        match &self.detail_levels {
            Some(l) => l.clone(),
            None => (1..=self.wavelet.levels).collect(),
        }
    }
}

/// Variogram fitted to the series and the model actually used for kriging.
pub fn fit_kriging_model(series: &RasterSeries<f64>, k: &KrigingSmoother) -> Result<VariogramModel> {
    let ev = empirical_variogram(series, &k.variogram)?;
    let fit = fit_variogram(&ev)?;
    Ok(match k.taper_range {
        Some(r) => fit.model.with_taper_range(r),
        None => fit.model,
    })
}

/// Log transform and pre-smoothing.
pub fn preprocess(series: &RasterSeries<f64>, cfg: &PipelineConfig) -> Result<RasterSeries<f64>> {
    let logged = match cfg.log_offset {
        Some(o) => log_transform(series, o)?,
        None => series.clone(),
    };
    match cfg.smoother {
        Smoother::None => Ok(logged),
        Smoother::WaveletThreshold(t) => {
            let images = logged
                .images()
                .par_iter()
                .map(|img| soft_threshold_denoise(img, &cfg.wavelet, t))
                .collect::<Result<Vec<_>>>()?;
            rebuild(&logged, images)
        }
        Smoother::Kriging(k) => {
            let model = fit_kriging_model(&logged, &k)?;
            krige_smooth(&logged, &model, &TargetGrid::observed(&logged))
        }
    }
}

fn rebuild(like: &RasterSeries<f64>, images: Vec<crate::grid::Grid<f64>>) -> Result<RasterSeries<f64>> {
    let (dx, dy) = like.pixel_spacing();
    let mut out = RasterSeries::new(images)?.with_pixel_spacing(dx, dy)?;
    if let Some(t) = like.timestamps() {
        out = out.with_timestamps(t.to_vec())?;
    }
    Ok(out)
}

pub fn transform_series(series: &RasterSeries<f64>, cfg: &PipelineConfig) -> Result<Vec<SubbandCoeffs<f64>>> {
    series
        .images()
        .par_iter()
        .map(|img| match cfg.transform {
            TransformKind::Decimated => dwt2(img, &cfg.wavelet),
            TransformKind::Stationary => swt2(img, &cfg.wavelet),
        })
        .collect()
}

/// Density curves and reduced model of one subband.
#[derive(Debug, Clone)]
pub struct SubbandFit {
    pub subband: Subband,
    /// Common density support across images.
    pub support: (f64, f64),
    pub curves: CurveSeries,
    pub model: Option<FunctionalModel>,
    /// `M x 2^J0`, rows clipped at zero and of unit norm.
    pub smoothed: DMatrix<f64>,
}

fn common_support(samples: &[Vec<f64>]) -> (f64, f64) {
    let (lo, hi) = samples
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 0.5, c + 0.5);
    }
    (lo, hi)
}

/// Clips rows at zero and rescales them to unit norm. A row that vanishes
/// is replaced by the normalised clipped mean row.
pub fn normalize_rows(mut x: DMatrix<f64>, fallback: &[f64]) -> DMatrix<f64> {
    let fb_norm = fallback.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    for mut row in x.row_iter_mut() {
        row.iter_mut().for_each(|v| *v = v.max(0.0));
        let n = row.norm();
        if n > 0.0 && n.is_finite() {
            row /= n;
        } else {
            for (v, f) in row.iter_mut().zip(fallback) {
                *v = if fb_norm > 0.0 { f.max(0.0) / fb_norm } else { 0.0 };
            }
        }
    }
    x
}

/// Densities of every selected subband, reduced per `cfg.reduction`.
pub fn fit_subbands(coeffs: &[SubbandCoeffs<f64>], cfg: &PipelineConfig) -> Result<Vec<SubbandFit>> {
    let levels = cfg.levels();
    cfg.subbands
        .iter()
        .enumerate()
        .map(|(idx, &band)| {
            let samples: Vec<Vec<f64>> = coeffs.iter().map(|c| c.vectorize(band, &levels)).collect();
            let support = common_support(&samples);
            let rows = samples
                .par_iter()
                .map(|s| cfg.density.estimate(s, support).map(|d| d.coeffs().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let curves = CurveSeries::from_rows(&rows)?;
            let (model, raw) = match cfg.reduction {
                Reduction::Off => (None, curves.curves()),
                Reduction::Fixed(d) => {
                    let model = FunctionalModel::with_dimension(&curves, cfg.dimension.p, d.min(curves.dim()))?;
                    let r = reconstruct(&model, &curves)?;
                    (Some(model), r)
                }
                Reduction::Bootstrap => {
                    let dcfg = DimensionConfig {
                        stream: cfg.dimension.stream.wrapping_add(idx as u32),
                        ..cfg.dimension
                    };
                    let model = estimate_dimension(&curves, &dcfg)?;
                    let r = reconstruct(&model, &curves)?;
                    (Some(model), r)
                }
            };
            let mean: Vec<f64> = curves.mean().iter().copied().collect();
            Ok(SubbandFit {
                subband: band,
                support,
                smoothed: normalize_rows(raw, &mean),
                curves,
                model,
            })
        })
        .collect()
}

/// Preprocess, transform and fit in one go.
pub fn run_stages(series: &RasterSeries<f64>, cfg: &PipelineConfig) -> Result<Vec<SubbandFit>> {
    cfg.validate()?;
    series.require_pairs()?;
    let prepared = preprocess(series, cfg)?;
    let coeffs = transform_series(&prepared, cfg)?;
    fit_subbands(&coeffs, cfg)
}

/// Mixture functions of every loading series and their pointwise mean.
#[derive(Debug, Clone)]
pub struct MixtureAnalysis {
    /// `(subband, component, result)`; series without variation are skipped.
    pub components: Vec<(Subband, usize, MixtureResult<f64>)>,
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    /// Time indices of the valleys of the mean mixture function.
    pub valleys: Vec<usize>,
}

const FLAT_LOADINGS: f64 = 1e-9;

pub fn mixture_analysis(fits: &[SubbandFit], spec: &WaveletSpec, opts: &MixtureOptions) -> Result<MixtureAnalysis> {
    let m = fits
        .first()
        .ok_or_else(|| Error::InvalidParameter("no subbands".into()))?
        .curves
        .len();
    let mut components = Vec::new();
    for fit in fits {
        let Some(model) = &fit.model else { continue };
        for (k, col) in model.loadings.column_iter().enumerate() {
            let y: Vec<f64> = col.iter().copied().collect();
            let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if hi - lo <= FLAT_LOADINGS {
                continue;
            }
            components.push((fit.subband, k, estimate_mixture(&y, spec, opts)?));
        }
    }
    let n = m.next_power_of_two();
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect();
    let rho = if components.is_empty() {
        vec![1.0; n]
    } else {
        let curves: Vec<&[f64]> = components.iter().map(|c| c.2.rho.as_slice()).collect();
        mean_curves(&curves)?
    };
    let mut valleys: Vec<usize> = find_valleys(&rho, opts.valley_threshold)
        .into_iter()
        .map(|g| crate::mixture::grid_to_time(g, n, m))
        .collect();
    valleys.dedup();
    Ok(MixtureAnalysis { components, grid, rho, valleys })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn normalize_rows_clips_and_falls_back() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, -4.0, -1.0, -2.0]);
        let out = normalize_rows(x, &[0.0, 2.0]);
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(out.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn constant_subband_gets_unit_support() {
        assert_eq!(common_support(&[vec![2.0, 2.0], vec![2.0]]), (1.5, 2.5));
        assert_eq!(common_support(&[vec![1.0, 3.0], vec![-1.0]]), (-1.0, 3.0));
    }

    #[test]
    fn validation_rejects_bad_levels_and_duplicates() {
        let mut cfg = PipelineConfig { detail_levels: Some(vec![3]), ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.detail_levels = None;
        cfg.subbands = vec![Subband::Approx, Subband::Approx];
        assert!(cfg.validate().is_err());
        assert!(PipelineConfig::default().validate().is_ok());
    }

    #[test]
    fn explicit_zero_threshold_is_identity() {
        let s = RasterSeries::new(vec![Grid::from_fn(8, 8, |i, j| (i as f64).sin() + j as f64); 2]).unwrap();
        let cfg = PipelineConfig { smoother: Smoother::WaveletThreshold(Threshold::Explicit(0.0)), ..Default::default() };
        let out = preprocess(&s, &cfg).unwrap();
        assert!(out.image(0).max_abs_diff(s.image(0)) < 1e-12);
    }

    #[test]
    fn log_offset_applied() {
        let s = RasterSeries::new(vec![Grid::filled(4, 4, std::f64::consts::E); 2]).unwrap();
        let cfg = PipelineConfig { log_offset: Some(0.0), ..Default::default() };
        let out = preprocess(&s, &cfg).unwrap();
        assert!(out.image(1).as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }
}
