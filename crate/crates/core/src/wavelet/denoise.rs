use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{mad, soft_threshold, Scalar};

use super::{dwt2, idwt2, Orientation, SubbandCoeffs, WaveletSpec};

/// Threshold rule for [`soft_threshold_denoise`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// `sigma * sqrt(2 ln N)` with `sigma = MAD(finest diagonal) / 0.6745`.
    Universal,
    Explicit(f64),
}

/// Donoho–Johnstone universal threshold from decimated coefficients.
pub fn universal_threshold<T: Scalar>(coeffs: &SubbandCoeffs<T>, pixel_count: usize) -> T {
    let finest = coeffs
        .detail(1, Orientation::Diagonal)
        .map(|g| g.as_slice())
        .unwrap_or(&[]);
    let sigma = mad(finest) / T::lit(0.6745);
    let n = T::from_usize_lossy(pixel_count.max(2));
    sigma * (T::lit(2.0) * n.ln()).sqrt()
}

/// Soft-thresholds every detail coefficient of a decimated transform and
/// inverts; approximation coefficients are left untouched.
pub fn soft_threshold_denoise<T: Scalar>(
    image: &Grid<T>,
    spec: &WaveletSpec,
    threshold: Threshold,
) -> Result<Grid<T>> {
    let coeffs = dwt2(image, spec)?;
    let lambda = match threshold {
        Threshold::Universal => universal_threshold(&coeffs, image.len()),
        Threshold::Explicit(l) if l >= 0.0 && l.is_finite() => T::lit(l),
        Threshold::Explicit(l) => {
            return Err(Error::InvalidParameter(format!(
                "threshold must be a non-negative finite number, got {l}"
            )))
        }
    };
    if lambda == T::zero() {
        // exact identity, so downstream histograms see the same values
        return Ok(image.clone());
    }
    let shrunk = coeffs.map_details(|c| soft_threshold(c, lambda));
    idwt2(&shrunk, spec)
}
