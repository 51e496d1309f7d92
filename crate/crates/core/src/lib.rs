//! Nonparametric change-point analysis for raster image time series.
//!
//! The pipeline decomposes each image with a 2D wavelet transform, estimates
//! the square root of each subband's coefficient density, reduces the
//! resulting curve time series to its dynamic subspace, and compares images
//! through Hellinger distances collected in a multi-date divergence matrix
//! (MDDM). Loadings of the reduced series also feed a wavelet-regression
//! estimate of a two-population mixture function whose valleys flag changes.
//! Ordinary kriging with a tapered exponential covariance is available as a
//! pre-smoother.
//!
//! Grid, wavelet, density and mixture code is generic over [`Scalar`]
//! (`f32`/`f64`); linear-algebra stages work in `f64`.

pub mod density;
pub mod error;
pub mod functional;
pub mod grid;
pub mod kriging;
pub mod mddm;
pub mod mixture;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid = grid::Grid<f64>;
pub type Grid32 = grid::Grid<f32>;
pub type RasterSeries = raster::RasterSeries<f64>;
pub type RasterSeries32 = raster::RasterSeries<f32>;
pub type SqrtDensity = density::SqrtDensity<f64>;
pub type SqrtDensity32 = density::SqrtDensity<f32>;
pub type SubbandCoeffs = wavelet::SubbandCoeffs<f64>;
pub type SubbandCoeffs32 = wavelet::SubbandCoeffs<f32>;
pub type MixtureResult = mixture::MixtureResult<f64>;
pub type MixtureResult32 = mixture::MixtureResult<f32>;
