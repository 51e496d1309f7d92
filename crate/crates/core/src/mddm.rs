//! Multi-date divergence matrices.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::hellinger_coeffs;
use crate::error::{Error, Result};
use crate::functional::forecast_loadings;
use crate::pipeline::{normalize_rows, run_stages, PipelineConfig, SubbandFit};
use crate::raster::RasterSeries;
use crate::wavelet::Subband;

/// Symmetric `M x M` matrix of summed subband Hellinger distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Mddm {
    pub values: DMatrix<f64>,
    pub subband_breakdown: Option<BTreeMap<Subband, DMatrix<f64>>>,
}

impl Mddm {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn scaled(&self, factor: f64) -> Mddm {
        Mddm {
            values: &self.values * factor,
            subband_breakdown: self
                .subband_breakdown
                .as_ref()
                .map(|b| b.iter().map(|(k, v)| (*k, v * factor)).collect()),
        }
    }

    /// Writes `M` lines of `M` comma-separated values, no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_matrix_csv(&mut w, &self.values)
    }
}

pub fn write_matrix_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Pairwise Hellinger distances between unit-norm rows.
pub fn pairwise_hellinger(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let m = rows.nrows();
    let vecs: Vec<Vec<f64>> = rows.row_iter().map(|r| r.iter().copied().collect()).collect();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i + 1..m)
                .map(|j| hellinger_coeffs(&vecs[i], &vecs[j]).expect("rows share length"))
                .collect()
        })
        .collect();
    let mut out = DMatrix::zeros(m, m);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// MDDM from already fitted subbands.
pub fn mddm_from_fits(fits: &[SubbandFit], breakdown: bool) -> Result<Mddm> {
    let m = fits
        .first()
        .ok_or_else(|| Error::InvalidParameter("no subbands".into()))?
        .smoothed
        .nrows();
    let mut total = DMatrix::zeros(m, m);
    let mut parts = BTreeMap::new();
    for fit in fits {
        let d = pairwise_hellinger(&fit.smoothed);
        total += &d;
        if breakdown {
            parts.insert(fit.subband, d);
        }
    }
    Ok(Mddm {
        values: total,
        subband_breakdown: breakdown.then_some(parts),
    })
}

pub fn compute_mddm(series: &RasterSeries<f64>, cfg: &PipelineConfig) -> Result<Mddm> {
    let fits = run_stages(series, cfg)?;
    mddm_from_fits(&fits, true)
}

/// Row profile summaries of an MDDM.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeScores {
    /// Mean of each row without the diagonal.
    pub row_means: Vec<f64>,
    /// `mean_l |K(m, l) - K(m - 1, l)|`, zero for the first image.
    pub profile_jump: Vec<f64>,
    /// Index of the largest profile jump (first on ties).
    pub argmax: usize,
}

pub fn change_scores(mddm: &Mddm) -> ChangeScores {
    let k = &mddm.values;
    let m = k.nrows();
    let row_means = (0..m)
        .map(|i| {
            if m < 2 {
                0.0
            } else {
                (0..m).filter(|&j| j != i).map(|j| k[(i, j)]).sum::<f64>() / (m - 1) as f64
            }
        })
        .collect();
    let profile_jump: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                (0..m).map(|l| (k[(i, l)] - k[(i - 1, l)]).abs()).sum::<f64>() / m as f64
            }
        })
        .collect();
    let mut argmax = 0;
    for (i, &v) in profile_jump.iter().enumerate() {
        if v > profile_jump[argmax] {
            argmax = i;
        }
    }
    ChangeScores {
        row_means,
        profile_jump,
        argmax,
    }
}

/// `M x horizon` matrix of summed subband Hellinger distances between each
/// observed (reduced) density and the forecast density `h` steps ahead.
pub fn forecast_distances_from_fits(fits: &[SubbandFit], horizon: usize) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let m = fits
        .first()
        .ok_or_else(|| Error::InvalidParameter("no subbands".into()))?
        .smoothed
        .nrows();
    let mut out = DMatrix::zeros(m, horizon);
    for fit in fits {
        let model = fit.model.as_ref().ok_or_else(|| {
            Error::InvalidParameter("forecasting needs a reduced functional model".into())
        })?;
        let loadings = forecast_loadings(model, horizon)?;
        let mean: Vec<f64> = model.mean.iter().copied().collect();
        let predicted = normalize_rows(model.curves_from_loadings(&loadings)?, &mean);
        for i in 0..m {
            let obs: Vec<f64> = fit.smoothed.row(i).iter().copied().collect();
            for h in 0..horizon {
                let pred: Vec<f64> = predicted.row(h).iter().copied().collect();
                out[(i, h)] += hellinger_coeffs(&obs, &pred)?;
            }
        }
    }
    Ok(out)
}

pub fn forecast_distances(series: &RasterSeries<f64>, cfg: &PipelineConfig, horizon: usize) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let fits = run_stages(series, cfg)?;
    forecast_distances_from_fits(&fits, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::pipeline::Reduction;
    use crate::synth;
    use proptest::prelude::*;

    fn quick() -> PipelineConfig {
        PipelineConfig {
            dimension: crate::functional::DimensionConfig { replicates: 100, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn identical_images_give_zero_matrix() {
        let s = synth::identical(8, 16, 16, 3);
        let mddm = compute_mddm(&s, &quick()).unwrap();
        assert!(mddm.values.iter().all(|&v| v == 0.0));
        assert_eq!(mddm.subband_breakdown.unwrap().len(), 4);
    }

    #[test]
    fn symmetric_zero_diagonal_bounded() {
        let s = synth::variance_change(8, 16, 16, 4, 2.0, 5);
        let cfg = PipelineConfig { reduction: Reduction::Off, ..quick() };
        let mddm = compute_mddm(&s, &cfg).unwrap();
        let k = &mddm.values;
        for i in 0..8 {
            assert_eq!(k[(i, i)], 0.0);
            for j in 0..8 {
                assert_eq!(k[(i, j)], k[(j, i)]);
                assert!(k[(i, j)] >= 0.0 && k[(i, j)] <= 4.0);
            }
        }
    }

    #[test]
    fn permuting_images_permutes_matrix() {
        let s = synth::variance_change(8, 16, 16, 4, 2.0, 6);
        let cfg = PipelineConfig { reduction: Reduction::Off, ..quick() };
        let order = [3, 7, 0, 5, 1, 6, 2, 4];
        let a = compute_mddm(&s, &cfg).unwrap().values;
        let b = compute_mddm(&s.permuted(&order), &cfg).unwrap().values;
        for i in 0..8 {
            for j in 0..8 {
                assert!((b[(i, j)] - a[(order[i], order[j])]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scores_of_zero_matrix() {
        let s = change_scores(&Mddm { values: DMatrix::zeros(5, 5), subband_breakdown: None });
        assert_eq!(s.row_means, vec![0.0; 5]);
        assert_eq!(s.profile_jump, vec![0.0; 5]);
        assert_eq!(s.argmax, 0);
    }

    #[test]
    fn block_matrix_scores() {
        let values = DMatrix::from_fn(8, 8, |i, j| if i == j { 0.0 } else if (i < 4) == (j < 4) { 0.1 } else { 1.0 });
        let s = change_scores(&Mddm { values, subband_breakdown: None });
        assert_eq!(s.argmax, 4);
    }

    proptest! {
        #[test]
        fn scores_scale_linearly(vals in proptest::collection::vec(0.0f64..1.0, 15), c in 0.1f64..10.0) {
            let mut values = DMatrix::zeros(6, 6);
            let mut it = vals.into_iter();
            for i in 0..6 {
                for j in i + 1..6 {
                    let v = it.next().unwrap();
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
            let mddm = Mddm { values, subband_breakdown: None };
            let a = change_scores(&mddm);
            let b = change_scores(&mddm.scaled(c));
            prop_assert_eq!(a.argmax, b.argmax);
            for (x, y) in a.row_means.iter().zip(&b.row_means) {
                prop_assert!((x * c - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn horizon_zero_rejected() {
        let s = synth::identical(12, 8, 8, 1);
        assert!(forecast_distances(&s, &quick(), 0).is_err());
    }

    #[test]
    fn constant_series_zero_forecast_distance() {
        let s = RasterSeries::new(vec![Grid::from_fn(8, 8, |i, j| (i * 3 + j) as f64); 12]).unwrap();
        let d = forecast_distances(&s, &quick(), 3).unwrap();
        assert_eq!(d.shape(), (12, 3));
        assert!(d.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn csv_layout() {
        let mddm = Mddm { values: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]), subband_breakdown: None };
        let mut buf = Vec::new();
        mddm.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.0,0.5\n0.5,0.0\n");
    }
}
