use nsf_core::{
    loss_eval, loss_grad, sample_noise, ConvLayer, ConvNetModel, ImageGrid, LossSpec, Model, NoiseSpec, Penalty,
    RngSeed, SpectralDiagonalModel,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn random(h: usize, w: usize, sigma: f64, seed: u64, stream: u64) -> ImageGrid {
    sample_noise(&NoiseSpec::gaussian(sigma), h, w, RngSeed::new(seed, stream)).unwrap()
}

/// Worst deviation scaled by the largest analytic entry.
fn scaled_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()))
        / scale
}

fn all_loss_specs() -> Vec<LossSpec> {
    let mut specs = vec![LossSpec::SpatialL2];
    for phi in [
        Penalty::abs_pow(1.0).unwrap(),
        Penalty::abs_pow(1.5).unwrap(),
        Penalty::abs_pow(2.0).unwrap(),
        Penalty::huber(0.03).unwrap(),
    ] {
        specs.push(LossSpec::FourierFull(phi));
        specs.push(LossSpec::FourierK0(phi));
    }
    specs
}

fn loss_fd(spec: &LossSpec, f: &ImageGrid, y: &ImageGrid, step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let mut plus = f.clone();
        plus.data_mut()[i] += step;
        let mut minus = f.clone();
        minus.data_mut()[i] -= step;
        out.push((loss_eval(spec, &plus, y).unwrap() - loss_eval(spec, &minus, y).unwrap()) / (2.0 * step));
    }
    out
}

#[test]
fn loss_gradients_match_central_differences() {
    for spec in all_loss_specs() {
        let mut worst: f64 = 0.0;
        for trial in 0..20 {
            let y = random(16, 16, 0.3, 100 + trial, 0);
            let f = y.add(&random(16, 16, 0.2, 100 + trial, 1)).unwrap();
            let g = loss_grad(&spec, &f, &y).unwrap();
            worst = worst.max(scaled_error(g.data(), &loss_fd(&spec, &f, &y, 1e-5)));
        }
        assert!(worst < 1e-5, "{spec:?}: {worst}");
    }
}

#[test]
fn quadratic_fourier_gradient_is_scaled_residual() {
    let y = random(16, 16, 1.0, 1, 0);
    let f = random(16, 16, 1.0, 1, 1);
    let g = loss_grad(&LossSpec::FourierFull(Penalty::abs_pow(2.0).unwrap()), &f, &y).unwrap();
    let expect = f.sub(&y).unwrap().scale(2.0 / 256.0);
    for (a, b) in g.data().iter().zip(expect.data()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn loss_identities() {
    let y = random(12, 10, 1.0, 2, 0);
    let f = random(12, 10, 1.0, 2, 1);
    for spec in all_loss_specs() {
        assert_eq!(loss_eval(&spec, &y, &y).unwrap(), 0.0);
        assert!(loss_grad(&spec, &y, &y).unwrap().data().iter().all(|&g| g == 0.0));
    }
    let full = loss_eval(&LossSpec::FourierFull(Penalty::abs_pow(2.0).unwrap()), &f, &y).unwrap();
    let spatial = loss_eval(&LossSpec::SpatialL2, &f, &y).unwrap();
    assert!((full - spatial / 120.0).abs() <= 1e-10 * full);
    // every column of d sums to zero, so the k = 0 coefficients of d vanish
    let d = ImageGrid::from_fn(12, 10, |u, v| if u == 0 { -11.0 * (v as f64 + 1.0) } else { v as f64 + 1.0 });
    let k0 = LossSpec::FourierK0(Penalty::huber(0.03).unwrap());
    assert!(loss_eval(&k0, &f, &f.add(&d).unwrap()).unwrap().abs() < 1e-12);
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = ImageGrid::zeros(4, 4);
    let b = ImageGrid::zeros(4, 5);
    assert!(loss_eval(&LossSpec::SpatialL2, &a, &b).is_err());
    assert!(loss_grad(&LossSpec::FourierFull(Penalty::huber(0.1).unwrap()), &a, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn k0_gradient_is_constant_down_columns(h in 1usize..20, w in 1usize..20, seed in any::<u64>(), delta in 0.001f64..0.5) {
        let y = random(h, w, 1.0, seed, 0);
        let f = random(h, w, 1.0, seed, 1);
        let g = loss_grad(&LossSpec::FourierK0(Penalty::huber(delta).unwrap()), &f, &y).unwrap();
        for u in 1..h {
            for v in 0..w {
                prop_assert!((g.get(u, v) - g.get(0, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn losses_are_non_negative(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let y = random(h, w, 1.0, seed, 0);
        let f = random(h, w, 1.0, seed, 1);
        for spec in all_loss_specs() {
            prop_assert!(loss_eval(&spec, &f, &y).unwrap() >= 0.0);
        }
    }

    #[test]
    fn k0_loss_ignores_column_balanced_changes(h in 2usize..12, w in 1usize..12, seed in any::<u64>()) {
        let f = random(h, w, 1.0, seed, 0);
        let raw = random(h, w, 1.0, seed, 1);
        let mut d = raw.clone();
        for v in 0..w {
            let mean = (0..h).map(|u| raw.get(u, v)).sum::<f64>() / h as f64;
            for u in 0..h {
                d.set(u, v, raw.get(u, v) - mean);
            }
        }
        let spec = LossSpec::FourierK0(Penalty::abs_pow(1.0).unwrap());
        prop_assert!(loss_eval(&spec, &f, &f.add(&d).unwrap()).unwrap() < 1e-12);
    }
}

/// Central differences of `sum(upstream * model(x))` with respect to every parameter.
fn param_fd<M: Model + Clone>(model: &M, x: &ImageGrid, upstream: &ImageGrid, step: f64) -> Vec<f64> {
    let objective = |m: &M| {
        let f = m.forward(x).unwrap();
        f.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    (0..model.num_params())
        .map(|i| {
            let mut plus = model.clone();
            plus.params_mut()[i] += step;
            let mut minus = model.clone();
            minus.params_mut()[i] -= step;
            (objective(&plus) - objective(&minus)) / (2.0 * step)
        })
        .collect()
}

#[test]
fn convnet_parameter_gradients() {
    let layers = [ConvLayer::new(3, 1, 4), ConvLayer::new(3, 4, 1)];
    for trial in 0..20 {
        let model = ConvNetModel::init(&layers, RngSeed::new(trial, 7), false).unwrap();
        let x = random(16, 16, 1.0, trial, 8);
        let upstream = random(16, 16, 1.0, trial, 9);
        let analytic = nsf_core::model_backward(&model, &x, &upstream).unwrap();
        let err = scaled_error(&analytic, &param_fd(&model, &x, &upstream, 1e-6));
        assert!(err < 1e-4, "trial {trial}: {err}");
    }
}

#[test]
fn default_convnet_gradients_through_a_fourier_loss() {
    let model = ConvNetModel::init(&ConvNetModel::default_layers(), RngSeed::new(3, 0), false).unwrap();
    let x = random(16, 16, 0.5, 4, 0);
    let y = random(16, 16, 0.5, 4, 1);
    let spec = LossSpec::FourierFull(Penalty::huber(0.03).unwrap());
    let f = model.forward(&x).unwrap();
    let upstream = loss_grad(&spec, &f, &y).unwrap();
    let analytic = nsf_core::model_backward(&model, &x, &upstream).unwrap();
    let step = 1e-6;
    let numeric: Vec<f64> = (0..model.num_params())
        .map(|i| {
            let mut plus = model.clone();
            plus.params_mut()[i] += step;
            let mut minus = model.clone();
            minus.params_mut()[i] -= step;
            let lp = loss_eval(&spec, &plus.forward(&x).unwrap(), &y).unwrap();
            let lm = loss_eval(&spec, &minus.forward(&x).unwrap(), &y).unwrap();
            (lp - lm) / (2.0 * step)
        })
        .collect();
    let err = scaled_error(&analytic, &numeric);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn spectral_diagonal_gradients_under_spatial_l2() {
    for trial in 0..20 {
        let model = SpectralDiagonalModel::from_fn(16, 16, |k, l| {
            Complex64::new(1.0 / (1.0 + (k * l) as f64 * 0.01), 0.05 * ((k + 2 * l) % 5) as f64)
        });
        let x = random(16, 16, 1.0, 200 + trial, 0);
        let y = random(16, 16, 1.0, 200 + trial, 1);
        let f = model.forward(&x).unwrap();
        let upstream = loss_grad(&LossSpec::SpatialL2, &f, &y).unwrap();
        let analytic = nsf_core::model_backward(&model, &x, &upstream).unwrap();
        let step = 1e-6;
        let numeric: Vec<f64> = (0..model.num_params())
            .map(|i| {
                let mut plus = model.clone();
                plus.params_mut()[i] += step;
                let mut minus = model.clone();
                minus.params_mut()[i] -= step;
                let lp = loss_eval(&LossSpec::SpatialL2, &plus.forward(&x).unwrap(), &y).unwrap();
                let lm = loss_eval(&LossSpec::SpatialL2, &minus.forward(&x).unwrap(), &y).unwrap();
                (lp - lm) / (2.0 * step)
            })
            .collect();
        let err = scaled_error(&analytic, &numeric);
        assert!(err < 1e-6, "trial {trial}: {err}");
    }
}

#[test]
fn zero_upstream_gives_zero_parameter_gradients() {
    let x = random(8, 8, 1.0, 5, 0);
    let zero = ImageGrid::zeros(8, 8);
    let conv = ConvNetModel::init(&ConvNetModel::default_layers(), RngSeed::new(5, 1), false).unwrap();
    assert!(nsf_core::model_backward(&conv, &x, &zero).unwrap().iter().all(|&g| g == 0.0));
    let diag = SpectralDiagonalModel::identity(8, 8);
    assert!(nsf_core::model_backward(&diag, &x, &zero).unwrap().iter().all(|&g| g == 0.0));
}
