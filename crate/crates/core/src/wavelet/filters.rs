use crate::scalar::Scalar;

use super::WaveletFamily;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

// Daubechies scaling filters, normalized so that the taps sum to sqrt(2).
fn daubechies4() -> [f64; 4] {
    let s3 = 3.0_f64.sqrt();
    let d = 4.0 * SQRT_2;
    [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
}

const DAUBECHIES8: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_4,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_85,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_77,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_03,
];

/// Orthonormal two-channel filter bank.
///
/// `low` is the scaling filter `h`; `high[n] = (-1)^n h[L-1-n]`.
#[derive(Debug, Clone)]
pub struct FilterBank<T> {
    pub low: Vec<T>,
    pub high: Vec<T>,
}

impl<T: Scalar> FilterBank<T> {
    pub fn new(family: WaveletFamily) -> Self {
        let low: Vec<f64> = match family {
            WaveletFamily::Haar => vec![1.0 / SQRT_2, 1.0 / SQRT_2],
            WaveletFamily::Daubechies4 => daubechies4().to_vec(),
            WaveletFamily::Daubechies8 => DAUBECHIES8.to_vec(),
        };
        let len = low.len();
        let high: Vec<f64> = (0..len)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * low[len - 1 - n]
            })
            .collect();
        FilterBank {
            low: low.into_iter().map(T::lit).collect(),
            high: high.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }
}
