//! Undecimated (à trous) periodic transform.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

use super::{DetailLevel, FilterBank, SubbandCoeffs, TransformKind, WaveletSpec};

fn analysis_step<T: Scalar>(x: &[T], fb: &FilterBank<T>, step: usize, lo: &mut [T], hi: &mut [T]) {
    let n = x.len();
    for k in 0..n {
        let mut a = T::zero();
        let mut d = T::zero();
        for (t, (&h, &g)) in fb.low.iter().zip(&fb.high).enumerate() {
            let v = x[(k + t * step) % n];
            a = a + h * v;
            d = d + g * v;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Half the adjoint of [`analysis_step`]; the undecimated pair is a tight
/// frame with bound 2, so this is an exact inverse.
fn synthesis_step<T: Scalar>(lo: &[T], hi: &[T], fb: &FilterBank<T>, step: usize, out: &mut [T]) {
    let n = out.len();
    out.iter_mut().for_each(|v| *v = T::zero());
    for k in 0..n {
        for (t, (&h, &g)) in fb.low.iter().zip(&fb.high).enumerate() {
            let idx = (k + t * step) % n;
            out[idx] = out[idx] + h * lo[k] + g * hi[k];
        }
    }
    let half = T::lit(0.5);
    out.iter_mut().for_each(|v| *v = *v * half);
}

fn along_rows<T: Scalar>(img: &Grid<T>, fb: &FilterBank<T>, step: usize) -> (Grid<T>, Grid<T>) {
    let (r, c) = img.shape();
    let mut lo_g = Grid::zeros(r, c);
    let mut hi_g = Grid::zeros(r, c);
    let mut lo = vec![T::zero(); c];
    let mut hi = vec![T::zero(); c];
    for i in 0..r {
        analysis_step(img.row(i), fb, step, &mut lo, &mut hi);
        lo_g.as_mut_slice()[i * c..(i + 1) * c].copy_from_slice(&lo);
        hi_g.as_mut_slice()[i * c..(i + 1) * c].copy_from_slice(&hi);
    }
    (lo_g, hi_g)
}

fn along_cols<T: Scalar>(img: &Grid<T>, fb: &FilterBank<T>, step: usize) -> (Grid<T>, Grid<T>) {
    let (lo, hi) = along_rows(&img.transpose(), fb, step);
    (lo.transpose(), hi.transpose())
}

fn merge_rows<T: Scalar>(lo_g: &Grid<T>, hi_g: &Grid<T>, fb: &FilterBank<T>, step: usize) -> Grid<T> {
    let (r, c) = lo_g.shape();
    let mut out = Grid::zeros(r, c);
    let mut row = vec![T::zero(); c];
    for i in 0..r {
        synthesis_step(lo_g.row(i), hi_g.row(i), fb, step, &mut row);
        out.as_mut_slice()[i * c..(i + 1) * c].copy_from_slice(&row);
    }
    out
}

fn merge_cols<T: Scalar>(lo_g: &Grid<T>, hi_g: &Grid<T>, fb: &FilterBank<T>, step: usize) -> Grid<T> {
    merge_rows(&lo_g.transpose(), &hi_g.transpose(), fb, step).transpose()
}

/// Stationary 2D wavelet transform. Every subband keeps the full image size,
/// and a circular shift of the input circularly shifts every subband.
///
/// With orthonormal filters each level multiplies energy by 4, so
/// `sum_j 4^-j E(details_j) + 4^-J E(approx_J) = E(image)`.
pub fn swt2<T: Scalar>(image: &Grid<T>, spec: &WaveletSpec) -> Result<SubbandCoeffs<T>> {
    spec.validate()?;
    let len = spec.family.filter_len();
    if image.rows() < len || image.cols() < len {
        return Err(Error::Dimension(format!(
            "image {}x{} smaller than filter support {len}",
            image.rows(),
            image.cols()
        )));
    }
    let fb = spec.filters::<T>();
    let mut approx = image.clone();
    let mut details = Vec::with_capacity(spec.levels);
    for j in 0..spec.levels {
        let step = 1usize << j;
        let (row_lo, row_hi) = along_rows(&approx, &fb, step);
        let (ll, lh) = along_cols(&row_lo, &fb, step);
        let (hl, hh) = along_cols(&row_hi, &fb, step);
        details.push(DetailLevel {
            horizontal: hl,
            vertical: lh,
            diagonal: hh,
        });
        approx = ll;
    }
    Ok(SubbandCoeffs {
        kind: TransformKind::Stationary,
        approx,
        details,
    })
}

pub fn iswt2<T: Scalar>(coeffs: &SubbandCoeffs<T>, spec: &WaveletSpec) -> Result<Grid<T>> {
    spec.validate()?;
    if coeffs.kind != TransformKind::Stationary {
        return Err(Error::InvalidParameter(
            "iswt2 requires stationary coefficients".into(),
        ));
    }
    if coeffs.details.len() != spec.levels {
        return Err(Error::Dimension(format!(
            "expected {} detail levels, got {}",
            spec.levels,
            coeffs.details.len()
        )));
    }
    let fb = spec.filters::<T>();
    let shape = coeffs.approx.shape();
    let mut approx = coeffs.approx.clone();
    for (j, d) in coeffs.details.iter().enumerate().rev() {
        if d.horizontal.shape() != shape || d.vertical.shape() != shape || d.diagonal.shape() != shape
        {
            return Err(Error::Dimension(format!(
                "level {} subbands do not match shape {shape:?}",
                j + 1
            )));
        }
        let step = 1usize << j;
        let row_lo = merge_cols(&approx, &d.vertical, &fb, step);
        let row_hi = merge_cols(&d.horizontal, &d.diagonal, &fb, step);
        approx = merge_rows(&row_lo, &row_hi, &fb, step);
    }
    Ok(approx)
}
