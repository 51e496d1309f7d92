use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type accepted by the scalar-agnostic parts of the
/// crate (grids, wavelet transforms, density estimation, mixture regression).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Median of a slice (averaging the two central values for even length).
/// NaNs sort last. Returns zero for an empty slice.
pub fn median<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad<T: Scalar>(values: &[T]) -> T {
    let med = median(values);
    let dev: Vec<T> = values.iter().map(|&x| (x - med).abs()).collect();
    median(&dev)
}

/// Soft shrinkage `sign(c) * max(|c| - lambda, 0)`.
#[inline]
pub fn soft_threshold<T: Scalar>(c: T, lambda: T) -> T {
    let mag = c.abs() - lambda;
    if mag > T::zero() {
        mag * c.signum()
    } else {
        T::zero()
    }
}

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_rule() {
        assert_eq!(soft_threshold(3.0_f64, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5_f64, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.5_f32, 1.0), -1.5);
    }

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0_f64, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0_f64, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0_f64, 1.0, 2.0, 2.0, 4.0, 6.0, 9.0]), 1.0);
    }
}
