//! Seeded synthetic image series used as fixtures.
//!
//! Every generator draws image `m` from its own random stream, so a series
//! does not depend on how many images are generated after it. Pixel values
//! are on the log scale; [`exponentiate`] turns them into positive
//! intensities with multiplicative noise.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::raster::RasterSeries;
use crate::rng::{stream_id, stream_rng};

const FAMILY: u32 = 11;

/// Image `m` is white Gaussian noise with standard deviation `sigmas[m]`.
pub fn noise_series(sigmas: &[f64], rows: usize, cols: usize, seed: u64) -> RasterSeries<f64> {
    let images = sigmas
        .iter()
        .enumerate()
        .map(|(m, &s)| {
            let mut rng = stream_rng(seed, stream_id(FAMILY, m as u64));
            Grid::from_fn(rows, cols, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                s * z
            })
        })
        .collect();
    RasterSeries::new(images).expect("generator produces a consistent series")
}

/// `m` copies of one noise image.
pub fn identical(m: usize, rows: usize, cols: usize, seed: u64) -> RasterSeries<f64> {
    let one = noise_series(&[1.0], rows, cols, seed).images()[0].clone();
    RasterSeries::new(vec![one; m.max(2)]).expect("consistent")
}

/// Unit-variance noise; from image `change_at` (0-based) on the variance is
/// multiplied by `factor`.
pub fn variance_change(m: usize, rows: usize, cols: usize, change_at: usize, factor: f64, seed: u64) -> RasterSeries<f64> {
    let sigmas: Vec<f64> = (0..m).map(|i| if i < change_at { 1.0 } else { factor.sqrt() }).collect();
    noise_series(&sigmas, rows, cols, seed)
}

/// Standard deviation growing linearly from 1 to `1 + slope (m - 1)`.
pub fn drift(m: usize, rows: usize, cols: usize, slope: f64, seed: u64) -> RasterSeries<f64> {
    let sigmas: Vec<f64> = (0..m).map(|i| 1.0 + slope * i as f64).collect();
    noise_series(&sigmas, rows, cols, seed)
}

/// Unit-variance noise except image `at`, whose standard deviation is `factor`.
pub fn transient(m: usize, rows: usize, cols: usize, at: usize, factor: f64, seed: u64) -> RasterSeries<f64> {
    let sigmas: Vec<f64> = (0..m).map(|i| if i == at { factor } else { 1.0 }).collect();
    noise_series(&sigmas, rows, cols, seed)
}

/// Independent unit-variance noise images.
pub fn no_change(m: usize, rows: usize, cols: usize, seed: u64) -> RasterSeries<f64> {
    noise_series(&vec![1.0; m], rows, cols, seed)
}

/// `exp` of every pixel.
pub fn exponentiate(series: &RasterSeries<f64>) -> RasterSeries<f64> {
    series
        .map_images(|g| Ok::<_, std::convert::Infallible>(g.map(f64::exp)))
        .expect("infallible")
}

/// Named fixtures for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Fixture {
    Identical,
    VarianceChange { change_at: usize, factor: f64 },
    Drift { slope: f64 },
    Transient { at: usize, factor: f64 },
    NoChange,
}

impl Fixture {
    pub fn generate(&self, m: usize, rows: usize, cols: usize, seed: u64) -> RasterSeries<f64> {
        match *self {
            Fixture::Identical => identical(m, rows, cols, seed),
            Fixture::VarianceChange { change_at, factor } => variance_change(m, rows, cols, change_at, factor, seed),
            Fixture::Drift { slope } => drift(m, rows, cols, slope, seed),
            Fixture::Transient { at, factor } => transient(m, rows, cols, at, factor, seed),
            Fixture::NoChange => no_change(m, rows, cols, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_stable() {
        let a = no_change(4, 5, 5, 9);
        let b = no_change(6, 5, 5, 9);
        for m in 0..4 {
            assert_eq!(a.image(m), b.image(m));
        }
    }

    #[test]
    fn variance_change_levels() {
        let s = variance_change(4, 64, 64, 2, 4.0, 1);
        let var = |m: usize| s.image(m).energy() / 4096.0;
        assert!((var(0) - 1.0).abs() < 0.1);
        assert!((var(3) - 4.0).abs() < 0.4);
    }

    #[test]
    fn exponentiated_series_is_positive() {
        let s = exponentiate(&drift(3, 4, 4, 0.5, 2));
        assert!(s.images().iter().all(|g| g.as_slice().iter().all(|&v| v > 0.0)));
    }
}
