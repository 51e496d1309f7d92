use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

use super::{DetailLevel, FilterBank, SubbandCoeffs, TransformKind, WaveletSpec};

/// Multi-level 1D periodic DWT output. `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Dwt1Coeffs<T> {
    pub approx: Vec<T>,
    pub details: Vec<Vec<T>>,
}

impl<T: Scalar> Dwt1Coeffs<T> {
    /// Packs as `[a_J, d_J, d_{J-1}, ..., d_1]`.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.approx.clone();
        for d in self.details.iter().rev() {
            out.extend_from_slice(d);
        }
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat) for a signal of length `len`.
    pub fn from_flat(flat: &[T], levels: usize) -> Result<Self> {
        let len = flat.len();
        if levels == 0 || len % (1 << levels) != 0 {
            return Err(Error::Dimension(format!(
                "flat coefficient vector of length {len} incompatible with {levels} levels"
            )));
        }
        let approx_len = len >> levels;
        let approx = flat[..approx_len].to_vec();
        let mut details = Vec::with_capacity(levels);
        let mut start = approx_len;
        for j in (1..=levels).rev() {
            let n = len >> j;
            details.push(flat[start..start + n].to_vec());
            start += n;
        }
        details.reverse();
        Ok(Dwt1Coeffs { approx, details })
    }

    pub fn energy(&self) -> T {
        self.approx
            .iter()
            .chain(self.details.iter().flatten())
            .map(|&v| v * v)
            .sum()
    }
}

/// One analysis step: `lo[k] = sum_n h[n] x[(2k+n) mod N]`, likewise `hi`.
pub(super) fn analysis_step<T: Scalar>(x: &[T], fb: &FilterBank<T>, lo: &mut [T], hi: &mut [T]) {
    let n = x.len();
    for k in 0..n / 2 {
        let mut a = T::zero();
        let mut d = T::zero();
        for (t, (&h, &g)) in fb.low.iter().zip(&fb.high).enumerate() {
            let v = x[(2 * k + t) % n];
            a = a + h * v;
            d = d + g * v;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Adjoint of [`analysis_step`]; `out` has length `2 * lo.len()`.
pub(super) fn synthesis_step<T: Scalar>(lo: &[T], hi: &[T], fb: &FilterBank<T>, out: &mut [T]) {
    let n = out.len();
    out.iter_mut().for_each(|v| *v = T::zero());
    for k in 0..lo.len() {
        for (t, (&h, &g)) in fb.low.iter().zip(&fb.high).enumerate() {
            let idx = (2 * k + t) % n;
            out[idx] = out[idx] + h * lo[k] + g * hi[k];
        }
    }
}

pub fn dwt1<T: Scalar>(signal: &[T], spec: &WaveletSpec) -> Result<Dwt1Coeffs<T>> {
    spec.check_dyadic(signal.len(), "signal")?;
    let fb = spec.filters::<T>();
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(spec.levels);
    for _ in 0..spec.levels {
        let half = approx.len() / 2;
        let mut lo = vec![T::zero(); half];
        let mut hi = vec![T::zero(); half];
        analysis_step(&approx, &fb, &mut lo, &mut hi);
        details.push(hi);
        approx = lo;
    }
    Ok(Dwt1Coeffs { approx, details })
}

pub fn idwt1<T: Scalar>(coeffs: &Dwt1Coeffs<T>, spec: &WaveletSpec) -> Result<Vec<T>> {
    spec.validate()?;
    if coeffs.details.len() != spec.levels {
        return Err(Error::Dimension(format!(
            "expected {} detail levels, got {}",
            spec.levels,
            coeffs.details.len()
        )));
    }
    let fb = spec.filters::<T>();
    let mut approx = coeffs.approx.clone();
    for detail in coeffs.details.iter().rev() {
        if detail.len() != approx.len() {
            return Err(Error::Dimension(format!(
                "detail of length {} does not match approximation of length {}",
                detail.len(),
                approx.len()
            )));
        }
        let mut out = vec![T::zero(); 2 * approx.len()];
        synthesis_step(&approx, detail, &fb, &mut out);
        approx = out;
    }
    Ok(approx)
}

struct Split<T> {
    ll: Grid<T>,
    lh: Grid<T>,
    hl: Grid<T>,
    hh: Grid<T>,
}

/// Separable single-level analysis. Naming: first letter is the row-direction
/// filter (along columns index), second the column-direction filter.
fn analysis_2d<T: Scalar>(img: &Grid<T>, fb: &FilterBank<T>) -> Split<T> {
    let (r, c) = img.shape();
    let (hr, hc) = (r / 2, c / 2);
    let mut row_lo = Grid::zeros(r, hc);
    let mut row_hi = Grid::zeros(r, hc);
    let mut lo = vec![T::zero(); hc];
    let mut hi = vec![T::zero(); hc];
    for i in 0..r {
        analysis_step(img.row(i), fb, &mut lo, &mut hi);
        for k in 0..hc {
            row_lo[(i, k)] = lo[k];
            row_hi[(i, k)] = hi[k];
        }
    }
    let columns = |src: &Grid<T>| -> (Grid<T>, Grid<T>) {
        let mut low = Grid::zeros(hr, hc);
        let mut high = Grid::zeros(hr, hc);
        let mut col = vec![T::zero(); r];
        let mut lo = vec![T::zero(); hr];
        let mut hi = vec![T::zero(); hr];
        for j in 0..hc {
            for i in 0..r {
                col[i] = src[(i, j)];
            }
            analysis_step(&col, fb, &mut lo, &mut hi);
            for k in 0..hr {
                low[(k, j)] = lo[k];
                high[(k, j)] = hi[k];
            }
        }
        (low, high)
    };
    let (ll, lh) = columns(&row_lo);
    let (hl, hh) = columns(&row_hi);
    Split { ll, lh, hl, hh }
}

fn synthesis_2d<T: Scalar>(s: &Split<T>, fb: &FilterBank<T>) -> Grid<T> {
    let (hr, hc) = s.ll.shape();
    let (r, c) = (2 * hr, 2 * hc);
    let columns = |low: &Grid<T>, high: &Grid<T>| -> Grid<T> {
        let mut out = Grid::zeros(r, hc);
        let mut lo = vec![T::zero(); hr];
        let mut hi = vec![T::zero(); hr];
        let mut col = vec![T::zero(); r];
        for j in 0..hc {
            for k in 0..hr {
                lo[k] = low[(k, j)];
                hi[k] = high[(k, j)];
            }
            synthesis_step(&lo, &hi, fb, &mut col);
            for i in 0..r {
                out[(i, j)] = col[i];
            }
        }
        out
    };
    let row_lo = columns(&s.ll, &s.lh);
    let row_hi = columns(&s.hl, &s.hh);
    let mut out = Grid::zeros(r, c);
    let mut row = vec![T::zero(); c];
    for i in 0..r {
        synthesis_step(row_lo.row(i), row_hi.row(i), fb, &mut row);
        for j in 0..c {
            out[(i, j)] = row[j];
        }
    }
    out
}

pub fn dwt2<T: Scalar>(image: &Grid<T>, spec: &WaveletSpec) -> Result<SubbandCoeffs<T>> {
    spec.check_dyadic(image.rows(), "image rows")?;
    spec.check_dyadic(image.cols(), "image cols")?;
    let fb = spec.filters::<T>();
    let mut approx = image.clone();
    let mut details = Vec::with_capacity(spec.levels);
    for _ in 0..spec.levels {
        let s = analysis_2d(&approx, &fb);
        details.push(DetailLevel {
            horizontal: s.hl,
            vertical: s.lh,
            diagonal: s.hh,
        });
        approx = s.ll;
    }
    Ok(SubbandCoeffs {
        kind: TransformKind::Decimated,
        approx,
        details,
    })
}

pub fn idwt2<T: Scalar>(coeffs: &SubbandCoeffs<T>, spec: &WaveletSpec) -> Result<Grid<T>> {
    spec.validate()?;
    if coeffs.kind != TransformKind::Decimated {
        return Err(Error::InvalidParameter(
            "idwt2 requires decimated coefficients".into(),
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
    let mut approx = coeffs.approx.clone();
    for d in coeffs.details.iter().rev() {
        let shape = approx.shape();
        if d.horizontal.shape() != shape || d.vertical.shape() != shape || d.diagonal.shape() != shape
        {
            return Err(Error::Dimension(format!(
                "detail subbands do not match approximation shape {shape:?}"
            )));
        }
        approx = synthesis_2d(
            &Split {
                ll: approx,
                lh: d.vertical.clone(),
                hl: d.horizontal.clone(),
                hh: d.diagonal.clone(),
            },
            &fb,
        );
    }
    Ok(approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{Orientation, WaveletFamily};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const S2: f64 = std::f64::consts::SQRT_2;

    /// Explicit orthonormal Haar matrix for one 1D level of length `n`.
    fn haar_matrix(n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for k in 0..n / 2 {
            m[k][2 * k] = 1.0 / S2;
            m[k][2 * k + 1] = 1.0 / S2;
            m[n / 2 + k][2 * k] = 1.0 / S2;
            m[n / 2 + k][2 * k + 1] = -1.0 / S2;
        }
        m
    }

    #[test]
    fn haar_1d_examples() {
        let c = dwt1(&[1.0, 1.0, 1.0, 1.0], &WaveletSpec::haar(1)).unwrap();
        assert_abs_diff_eq!(c.approx.as_slice(), [S2, S2].as_slice(), epsilon = 1e-15);
        assert_eq!(c.details[0], vec![0.0, 0.0]);

        // oracle: explicit matrix multiply
        let x = [1.0, 2.0, 3.0, 4.0];
        let m = haar_matrix(4);
        let y: Vec<f64> = m.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let c = dwt1(&x, &WaveletSpec::haar(1)).unwrap();
        assert_abs_diff_eq!(c.approx.as_slice(), &y[..2], epsilon = 1e-14);
        assert_abs_diff_eq!(c.details[0].as_slice(), &y[2..], epsilon = 1e-14);
        assert_abs_diff_eq!(c.approx[0], 2.1213203, epsilon = 1e-7);
        assert_abs_diff_eq!(c.approx[1], 4.9497475, epsilon = 1e-7);
        assert_abs_diff_eq!(c.details[0][0], -0.7071068, epsilon = 1e-7);
    }

    #[test]
    fn haar_2d_matches_explicit_matrix() {
        // 4x4 orthonormal 2D Haar on vec([[a,b],[c,d]]) = (a,b,c,d)
        let rows = [
            [0.5, 0.5, 0.5, 0.5],   // approx
            [0.5, -0.5, 0.5, -0.5], // horizontal: high along rows
            [0.5, 0.5, -0.5, -0.5], // vertical: high along columns
            [0.5, -0.5, -0.5, 0.5], // diagonal
        ];
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = rows.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        assert_eq!(y, vec![5.0, -1.0, -2.0, 0.0]);

        let img = Grid::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = dwt2(&img, &WaveletSpec::haar(1)).unwrap();
        assert_abs_diff_eq!(c.approx[(0, 0)], y[0], epsilon = 1e-14);
        assert_abs_diff_eq!(c.detail(1, Orientation::Horizontal).unwrap()[(0, 0)], y[1], epsilon = 1e-14);
        assert_abs_diff_eq!(c.detail(1, Orientation::Vertical).unwrap()[(0, 0)], y[2], epsilon = 1e-14);
        assert_abs_diff_eq!(c.detail(1, Orientation::Diagonal).unwrap()[(0, 0)], y[3], epsilon = 1e-14);

        let back = idwt2(&c, &WaveletSpec::haar(1)).unwrap();
        assert!(back.max_abs_diff(&img) < 1e-14);
    }

    #[test]
    fn constant_image_has_zero_details() {
        let img = Grid::<f64>::filled(4, 4, 1.0);
        let c = dwt2(&img, &WaveletSpec::haar(1)).unwrap();
        assert!(c.approx.as_slice().iter().all(|&v| (v - 2.0).abs() < 1e-14));
        for o in Orientation::ALL {
            assert!(c.detail(1, o).unwrap().as_slice().iter().all(|&v| v.abs() < 1e-14));
        }
        assert_eq!(c.coefficient_count(), 16);
    }

    #[test]
    fn zero_coefficients_invert_to_zero() {
        let spec = WaveletSpec::haar(1);
        let c = dwt2(&Grid::<f64>::zeros(2, 2), &spec).unwrap();
        assert_eq!(idwt2(&c, &spec).unwrap(), Grid::zeros(2, 2));
    }

    #[test]
    fn round_trip_random_8x8_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for family in WaveletFamily::ALL {
            for levels in 1..=3 {
                let spec = WaveletSpec::new(family, levels);
                let img: Grid<f64> = Grid::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
                let c = dwt2(&img, &spec).unwrap();
                assert!((c.energy() - img.energy()).abs() / img.energy() < 1e-12);
                let back = idwt2(&c, &spec).unwrap();
                assert!(back.max_abs_diff(&img) < 1e-10, "{family:?} J={levels}");
            }
        }
    }

    #[test]
    fn f32_round_trip() {
        let spec = WaveletSpec::new(WaveletFamily::Daubechies4, 2);
        let x: Vec<f32> = (0..16).map(|i| (i as f32 * 0.37).sin()).collect();
        let back = idwt1(&dwt1(&x, &spec).unwrap(), &spec).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn flat_packing_inverts() {
        let spec = WaveletSpec::haar(3);
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let c = dwt1(&x, &spec).unwrap();
        let flat = c.to_flat();
        assert_eq!(flat.len(), 16);
        assert_eq!(Dwt1Coeffs::from_flat(&flat, 3).unwrap(), c);
    }

    #[test]
    fn rejects_non_dyadic_lengths() {
        assert!(dwt1(&[1.0; 6], &WaveletSpec::haar(2)).is_err());
        assert!(dwt2(&Grid::<f64>::zeros(6, 8), &WaveletSpec::haar(2)).is_err());
        assert!(dwt1(&[1.0; 4], &WaveletSpec::haar(3)).is_err());
    }

    #[test]
    fn idwt2_rejects_shape_mismatch() {
        let spec = WaveletSpec::haar(1);
        let mut c = dwt2(&Grid::<f64>::zeros(4, 4), &spec).unwrap();
        c.details[0].diagonal = Grid::zeros(1, 2);
        assert!(idwt2(&c, &spec).is_err());
    }
}
