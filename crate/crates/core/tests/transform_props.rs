use std::f64::consts::PI;

use nsf_core::fourier::{box_kernel, kernel_from_taps};
use nsf_core::{circular_convolve, dft_forward, dft_inverse, kernel_transform, ImageGrid, NoiseSpec, RngSeed};
use num_complex::Complex64;
use proptest::prelude::*;

/// Direct O((UV)^2) evaluation of the normalized forward transform.
fn direct_dft(x: &ImageGrid) -> Vec<Complex64> {
    let (h, w) = x.shape();
    let mut out = Vec::with_capacity(h * w);
    for k in 0..h {
        for l in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..h {
                for v in 0..w {
                    let ph = -2.0 * PI * (((k * u) % h) as f64 / h as f64 + ((l * v) % w) as f64 / w as f64);
                    acc += x.get(u, v) * Complex64::new(ph.cos(), ph.sin());
                }
            }
            out.push(acc / (h * w) as f64);
        }
    }
    out
}

fn grid_strategy(max: usize) -> impl Strategy<Value = ImageGrid> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        prop::collection::vec(-10.0f64..10.0, h * w).prop_map(move |d| ImageGrid::new(h, w, d).unwrap())
    })
}

fn pair_strategy(max: usize) -> impl Strategy<Value = (ImageGrid, ImageGrid)> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        (
            prop::collection::vec(-5.0f64..5.0, h * w),
            prop::collection::vec(-5.0f64..5.0, h * w),
        )
            .prop_map(move |(a, b)| (ImageGrid::new(h, w, a).unwrap(), ImageGrid::new(h, w, b).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_path_matches_direct_sum(x in grid_strategy(32)) {
        let fast = dft_forward(&x);
        for (a, b) in fast.data().iter().zip(direct_dft(&x)) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval(x in grid_strategy(24)) {
        let f = dft_forward(&x);
        let lhs = f.energy();
        let rhs = x.energy() / x.len() as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
    }

    #[test]
    fn linearity((x, y) in pair_strategy(20), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let combo = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let lhs = dft_forward(&combo);
        let (fx, fy) = (dft_forward(&x), dft_forward(&y));
        for i in 0..lhs.data().len() {
            let rhs = fx.data()[i] * alpha + fy.data()[i] * beta;
            prop_assert!((lhs.data()[i] - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_symmetry(x in grid_strategy(24)) {
        let f = dft_forward(&x);
        let (h, w) = f.shape();
        prop_assert_eq!(f.im(0, 0), 0.0);
        for k in 0..h {
            for l in 0..w {
                let c = f.get((h - k) % h, (w - l) % w);
                prop_assert!((f.re(k, l) - c.re).abs() <= 1e-10);
                prop_assert!((f.im(k, l) + c.im).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn round_trip(x in grid_strategy(24)) {
        let back = dft_inverse(&dft_forward(&x)).unwrap();
        let scale = x.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (a, b) in x.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale * 10.0);
        }
    }

    #[test]
    fn convolution_theorem_for_random_taps(
        (h, w) in (1usize..12, 1usize..12),
        taps in prop::collection::vec((-4isize..4, -4isize..4, -1.0f64..1.0), 1..6),
        seed in any::<u64>(),
    ) {
        let kernel = kernel_from_taps(h, w, &taps);
        let eta = nsf_core::sample_noise(&NoiseSpec::gaussian(1.0), h, w, RngSeed::new(seed, 0)).unwrap();
        let lhs = dft_forward(&circular_convolve(&kernel, &eta).unwrap());
        let rhs = kernel_transform(&kernel).hadamard(&dft_forward(&eta)).unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn round_trip_random_16x16() {
    let x = nsf_core::sample_noise(&NoiseSpec::gaussian(1.0), 16, 16, RngSeed::new(11, 3)).unwrap();
    let back = dft_inverse(&dft_forward(&x)).unwrap();
    for (a, b) in x.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn box_kernel_convolution_theorem() {
    let h = box_kernel(32, 32, 3);
    let eta = nsf_core::sample_noise(&NoiseSpec::gaussian(1.0), 32, 32, RngSeed::new(5, 0)).unwrap();
    let lhs = dft_forward(&circular_convolve(&h, &eta).unwrap());
    let rhs = kernel_transform(&h).hadamard(&dft_forward(&eta)).unwrap();
    for (a, b) in lhs.data().iter().zip(rhs.data()) {
        assert!((a - b).norm() < 1e-10);
    }
}
