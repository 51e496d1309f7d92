//! Orthonormal periodic wavelet transforms.
//!
//! Decimated (`dwt1`, `dwt2`) and stationary (`swt2`) transforms share one
//! filter convention: analysis computes `a[k] = sum_n h[n] x[(2k + n) mod N]`
//! (or `x[(k + n*s) mod N]` with dilation `s = 2^(j-1)` for the stationary
//! transform), and synthesis applies the adjoint.
//!
//! Orientation convention for 2D transforms: the *horizontal* subband holds
//! the coefficients that are high-pass along each row and low-pass along each
//! column; *vertical* is the reverse; *diagonal* is high-pass in both.

mod denoise;
mod dwt;
mod filters;
mod swt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

pub use denoise::{soft_threshold_denoise, universal_threshold, Threshold};
pub use dwt::{dwt1, dwt2, idwt1, idwt2, Dwt1Coeffs};
pub use filters::FilterBank;
pub use swt::{iswt2, swt2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveletFamily {
    #[serde(rename = "haar")]
    Haar,
    /// Four-tap Daubechies filter (two vanishing moments).
    #[serde(rename = "daubechies-4")]
    Daubechies4,
    /// Eight-tap Daubechies filter (four vanishing moments).
    #[serde(rename = "daubechies-8")]
    Daubechies8,
}

impl WaveletFamily {
    pub const ALL: [WaveletFamily; 3] = [
        WaveletFamily::Haar,
        WaveletFamily::Daubechies4,
        WaveletFamily::Daubechies8,
    ];

    pub fn filter_len(self) -> usize {
        match self {
            WaveletFamily::Haar => 2,
            WaveletFamily::Daubechies4 => 4,
            WaveletFamily::Daubechies8 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Daubechies4 => "daubechies-4",
            WaveletFamily::Daubechies8 => "daubechies-8",
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WaveletFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown wavelet family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
}

/// Wavelet family, decomposition depth and boundary rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub levels: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl WaveletSpec {
    pub fn new(family: WaveletFamily, levels: usize) -> Self {
        WaveletSpec {
            family,
            levels,
            boundary: Boundary::Periodic,
        }
    }

    pub fn haar(levels: usize) -> Self {
        Self::new(WaveletFamily::Haar, levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidParameter(
                "wavelet levels must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn filters<T: Scalar>(&self) -> FilterBank<T> {
        FilterBank::new(self.family)
    }

    /// Checks that a length is divisible by `2^levels` (decimated transforms).
    pub(crate) fn check_dyadic(&self, len: usize, what: &str) -> Result<()> {
        self.validate()?;
        let block = 1usize
            .checked_shl(self.levels as u32)
            .filter(|&b| b <= len)
            .ok_or_else(|| {
                Error::Dimension(format!(
                    "{what} of length {len} too short for {} levels",
                    self.levels
                ))
            })?;
        if len % block != 0 {
            return Err(Error::Dimension(format!(
                "{what} of length {len} is not divisible by 2^{} = {block}",
                self.levels
            )));
        }
        Ok(())
    }
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec::new(WaveletFamily::Daubechies4, 3)
    }
}

/// Detail orientation `[n1, n2]` of a 2D subband.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    /// `[0, 1]`: high-pass along rows.
    Horizontal,
    /// `[1, 0]`: high-pass along columns.
    Vertical,
    /// `[1, 1]`.
    Diagonal,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [
        Orientation::Horizontal,
        Orientation::Vertical,
        Orientation::Diagonal,
    ];

    pub fn index(self) -> [u8; 2] {
        match self {
            Orientation::Horizontal => [0, 1],
            Orientation::Vertical => [1, 0],
            Orientation::Diagonal => [1, 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Decimated,
    Stationary,
}

/// The three detail subbands of one decomposition level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailLevel<T> {
    pub horizontal: Grid<T>,
    pub vertical: Grid<T>,
    pub diagonal: Grid<T>,
}

impl<T: Scalar> DetailLevel<T> {
    pub fn get(&self, o: Orientation) -> &Grid<T> {
        match o {
            Orientation::Horizontal => &self.horizontal,
            Orientation::Vertical => &self.vertical,
            Orientation::Diagonal => &self.diagonal,
        }
    }

    pub fn get_mut(&mut self, o: Orientation) -> &mut Grid<T> {
        match o {
            Orientation::Horizontal => &mut self.horizontal,
            Orientation::Vertical => &mut self.vertical,
            Orientation::Diagonal => &mut self.diagonal,
        }
    }
}

/// Coefficients of a 2D transform: approximation at the coarsest level `J`
/// plus detail subbands for levels `1..=J` (`details[0]` is the finest).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandCoeffs<T> {
    pub kind: TransformKind,
    pub approx: Grid<T>,
    pub details: Vec<DetailLevel<T>>,
}

impl<T: Scalar> SubbandCoeffs<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Detail subband at `level` (1-based, 1 = finest).
    pub fn detail(&self, level: usize, o: Orientation) -> Option<&Grid<T>> {
        level
            .checked_sub(1)
            .and_then(|j| self.details.get(j))
            .map(|d| d.get(o))
    }

    pub fn coefficient_count(&self) -> usize {
        self.approx.len()
            + self
                .details
                .iter()
                .map(|d| d.horizontal.len() + d.vertical.len() + d.diagonal.len())
                .sum::<usize>()
    }

    pub fn energy(&self) -> T {
        self.approx.energy()
            + self
                .details
                .iter()
                .map(|d| d.horizontal.energy() + d.vertical.energy() + d.diagonal.energy())
                .sum::<T>()
    }

    /// Vectorized coefficients of one orientation group, pooled over the
    /// given levels (coarsest first). The approximation group ignores `levels`.
    pub fn vectorize(&self, band: Subband, levels: &[usize]) -> Vec<T> {
        match band {
            Subband::Approx => self.approx.as_slice().to_vec(),
            Subband::Detail(o) => {
                let mut out = Vec::new();
                for &lvl in levels {
                    if let Some(g) = self.detail(lvl, o) {
                        out.extend_from_slice(g.as_slice());
                    }
                }
                out
            }
        }
    }

    pub fn map_details(&self, f: impl Fn(T) -> T) -> Self {
        SubbandCoeffs {
            kind: self.kind,
            approx: self.approx.clone(),
            details: self
                .details
                .iter()
                .map(|d| DetailLevel {
                    horizontal: d.horizontal.map(&f),
                    vertical: d.vertical.map(&f),
                    diagonal: d.diagonal.map(&f),
                })
                .collect(),
        }
    }
}

/// Orientation group of subbands: the approximation `[0,0]` or one detail
/// orientation pooled over levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subband {
    Approx,
    Detail(Orientation),
}

impl Subband {
    pub const ALL: [Subband; 4] = [
        Subband::Approx,
        Subband::Detail(Orientation::Horizontal),
        Subband::Detail(Orientation::Vertical),
        Subband::Detail(Orientation::Diagonal),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subband::Approx => "approx",
            Subband::Detail(Orientation::Horizontal) => "horizontal",
            Subband::Detail(Orientation::Vertical) => "vertical",
            Subband::Detail(Orientation::Diagonal) => "diagonal",
        }
    }
}

impl fmt::Display for Subband {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subband {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subband::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown subband `{s}`")))
    }
}
