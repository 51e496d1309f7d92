use mddm_core::grid::Grid;
use mddm_core::raster::{decode_rts1, encode_rts1, log_transform, RasterSeries};
use mddm_core::wavelet::{dwt1, dwt2, idwt1, idwt2, iswt2, swt2, Orientation, WaveletFamily, WaveletSpec};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = WaveletFamily> {
    prop_oneof![
        Just(WaveletFamily::Haar),
        Just(WaveletFamily::Daubechies4),
        Just(WaveletFamily::Daubechies8)
    ]
}

fn grid(rows: usize, cols: usize) -> impl Strategy<Value = Grid<f64>> {
    proptest::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| Grid::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dwt1_inverts_and_preserves_energy(
        fam in family(),
        levels in 1usize..=3,
        signal in proptest::collection::vec(-5.0f64..5.0, 32),
    ) {
        let spec = WaveletSpec::new(fam, levels);
        let c = dwt1(&signal, &spec).unwrap();
        let back = idwt1(&c, &spec).unwrap();
        let err = back.iter().zip(&signal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
        let e: f64 = signal.iter().map(|v| v * v).sum();
        prop_assert!((c.energy() - e).abs() <= 1e-10 * e.max(1.0));
    }

    #[test]
    fn dwt2_inverts_and_preserves_energy(fam in family(), levels in 1usize..=2, img in grid(16, 8)) {
        let spec = WaveletSpec::new(fam, levels);
        let c = dwt2(&img, &spec).unwrap();
        prop_assert!(idwt2(&c, &spec).unwrap().max_abs_diff(&img) < 1e-10);
        prop_assert!((c.energy() - img.energy()).abs() <= 1e-10 * img.energy().max(1.0));
    }

    #[test]
    fn swt2_inverts_and_commutes_with_shifts(
        fam in family(),
        levels in 1usize..=2,
        img in grid(8, 8),
        di in 0usize..8,
        dj in 0usize..8,
    ) {
        let spec = WaveletSpec::new(fam, levels);
        let c = swt2(&img, &spec).unwrap();
        prop_assert!(iswt2(&c, &spec).unwrap().max_abs_diff(&img) < 1e-10);
        let s = swt2(&img.circshift(di, dj), &spec).unwrap();
        for lvl in 1..=levels {
            for o in Orientation::ALL {
                let a = s.detail(lvl, o).unwrap();
                let b = c.detail(lvl, o).unwrap().circshift(di, dj);
                prop_assert!(a.max_abs_diff(&b) < 1e-10);
            }
        }
    }

    #[test]
    fn f32_transforms_round_trip(fam in family(), v in proptest::collection::vec(-1.0f32..1.0, 64)) {
        let img = Grid::from_vec(8, 8, v).unwrap();
        let spec = WaveletSpec::new(fam, 1);
        prop_assert!(idwt2(&dwt2(&img, &spec).unwrap(), &spec).unwrap().max_abs_diff(&img) < 1e-5);
        prop_assert!(iswt2(&swt2(&img, &spec).unwrap(), &spec).unwrap().max_abs_diff(&img) < 1e-5);
    }

    #[test]
    fn log_transform_is_monotone(v in proptest::collection::vec(1e-3f64..1e3, 8), offset in 0.0f64..2.0) {
        let g = Grid::from_vec(2, 4, v.clone()).unwrap();
        let s = RasterSeries::new(vec![g.clone(), g]).unwrap();
        let l = log_transform(&s, offset).unwrap();
        let out = l.image(0).as_slice();
        for i in 0..8 {
            for j in 0..8 {
                if v[i] < v[j] {
                    prop_assert!(out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn rts1_round_trip_is_bit_exact(v in proptest::collection::vec(proptest::num::f32::NORMAL, 24)) {
        let images = v.chunks(8).map(|c| Grid::from_vec(2, 4, c.to_vec()).unwrap()).collect();
        let s = RasterSeries::new(images).unwrap();
        let back: RasterSeries<f32> = decode_rts1(&encode_rts1(&s)).unwrap();
        for m in 0..3 {
            let a: Vec<u32> = s.image(m).as_slice().iter().map(|x| x.to_bits()).collect();
            let b: Vec<u32> = back.image(m).as_slice().iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
