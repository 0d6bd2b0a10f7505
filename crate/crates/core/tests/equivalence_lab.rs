use nsf_core::equivalence::sigma_map_for;
use nsf_core::penalty::SigmaMap;
use nsf_core::{
    argmin_check, blurred_penalty_eval, dft_forward, equivalence_gap, equivalence_gap_with, mc_expected_loss,
    penalty_curve, sample_noise, BlurredPenalty, ImageGrid, NoiseSpec, Penalty, RngSeed,
};
use proptest::prelude::*;

fn blur(phi: Penalty) -> BlurredPenalty {
    BlurredPenalty::new(phi, SigmaMap::Uniform(0.0)).unwrap()
}

fn abs1() -> Penalty {
    Penalty::abs_pow(1.0).unwrap()
}

fn residual_pair(h: usize, w: usize, rms: f64, seed: u64) -> (ImageGrid, ImageGrid) {
    let z = nsf_core::gen_clean(RngSeed::new(seed, 0), h, w, 4).unwrap();
    let r = sample_noise(&NoiseSpec::gaussian(rms), h, w, RngSeed::new(seed, 1)).unwrap();
    (z.add(&r).unwrap(), z)
}

#[test]
fn penalty_closed_forms() {
    assert_eq!(abs1().eval(-2.0), 2.0);
    assert_eq!(abs1().grad(-2.0).unwrap(), -1.0);
    let h = Penalty::huber(1.0).unwrap();
    assert_eq!(h.eval(3.0), 2.5);
    assert_eq!(h.grad(3.0).unwrap(), 1.0);
    assert_eq!(h.eval(0.5), 0.125);
    assert_eq!(h.grad(0.5).unwrap(), 0.5);
    assert!(Penalty::abs_pow(0.5).unwrap().grad(0.0).is_err());
    assert_eq!(abs1().grad(0.0).unwrap(), 0.0);
}

#[test]
fn folded_normal_mean() {
    let v = blurred_penalty_eval(&blur(abs1()), 0.0, 0.2);
    let exact = 0.2 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((v - exact).abs() < 1e-6, "{v} {exact}");
    assert!((v - 0.159577).abs() < 1e-6);
}

#[test]
fn folded_normal_mean_off_centre() {
    // E|t - sZ| = s sqrt(2/pi) exp(-t^2/2s^2) + t (1 - 2 Phi(-t/s))
    let s = 0.2f64;
    for t in [0.05f64, 0.13, 0.4, -0.3] {
        let erf = erf_oracle(t.abs() / (s * 2f64.sqrt()));
        let exact = s * (2.0 / std::f64::consts::PI).sqrt() * (-t * t / (2.0 * s * s)).exp() + t.abs() * erf;
        let v = blurred_penalty_eval(&blur(abs1()), t, s);
        assert!((v - exact).abs() < 1e-7, "{t}: {v} {exact}");
    }
}

/// Taylor series below 2.5, continued fraction above; both converge past 1e-12.
fn erf_oracle(x: f64) -> f64 {
    if x < 2.5 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        let mut f = 0.0;
        for k in (1..200).rev() {
            f = k as f64 / 2.0 / (x + f);
        }
        1.0 - (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
    }
}

#[test]
fn quadratic_blur_adds_variance() {
    let q2 = blur(Penalty::abs_pow(2.0).unwrap());
    for &(t, s) in &[(0.0, 1.0), (0.3, 0.2), (-4.0, 0.01), (2.5, 3.0)] {
        assert!((q2.eval(t, s) - (t * t + s * s)).abs() < 1e-9);
    }
}

#[test]
fn blur_approaches_the_asymptote() {
    assert!((blurred_penalty_eval(&blur(abs1()), 2.0, 0.2) - 2.0).abs() < 1e-4);
}

#[test]
fn zero_sigma_is_the_base_penalty() {
    let h = blur(Penalty::huber(0.03).unwrap());
    for t in [-1.0, -0.02, 0.0, 0.01, 0.5] {
        assert_eq!(h.eval(t, 0.0), Penalty::huber(0.03).unwrap().eval(t));
    }
}

#[test]
fn quadratic_mc_matches_closed_form() {
    let (f, z) = residual_pair(16, 16, 0.05, 1);
    let q2 = Penalty::abs_pow(2.0).unwrap();
    let est = mc_expected_loss(&f, &z, &NoiseSpec::gaussian(0.1), &q2, 2000, 3).unwrap();
    // each of the UV bins carries var a + var b = sigma^2 / UV
    let exact = f.sub(&z).unwrap().energy() / 256.0 + 0.01;
    assert!((est.mean - exact).abs() < 3.0 * est.std_error, "{est:?} {exact}");
}

#[test]
fn huber_mc_at_the_truth() {
    let z = nsf_core::gen_clean(RngSeed::new(2, 0), 16, 16, 3).unwrap();
    let phi = Penalty::huber(0.01).unwrap();
    let spec = NoiseSpec::gaussian(0.1);
    let est = mc_expected_loss(&z, &z, &spec, &phi, 2000, 4).unwrap();
    let bp = BlurredPenalty::new(phi, sigma_map_for(&spec, 16, 16).unwrap()).unwrap();
    let zs = dft_forward(&z);
    let oracle = bp.loss(&zs, &zs).unwrap();
    assert!((est.mean - oracle).abs() < 3.0 * est.std_error, "{est:?} {oracle}");
}

#[test]
fn noiseless_mc_is_exact() {
    let (f, z) = residual_pair(8, 8, 0.1, 5);
    let phi = Penalty::huber(0.05).unwrap();
    let est = mc_expected_loss(&f, &z, &NoiseSpec::gaussian(0.0), &phi, 1000, 6).unwrap();
    let direct = nsf_core::loss_eval(&nsf_core::LossSpec::FourierFull(phi), &f, &z).unwrap();
    assert_eq!(est.std_error, 0.0);
    assert!((est.mean - direct).abs() <= 1e-15 * direct);
    let gap = equivalence_gap(&f, &z, &NoiseSpec::gaussian(0.0), &phi, 100, 7).unwrap();
    assert_eq!(gap.gap, 0.0);
}

#[test]
fn argmin_examples() {
    assert!(argmin_check(&blur(abs1()), 0.2).unwrap());
    assert!(argmin_check(&blur(Penalty::huber(1.0).unwrap()), 0.5).unwrap());
    assert!(argmin_check(&blur(Penalty::abs_pow(2.0).unwrap()), 1.0).unwrap());
    assert!(argmin_check(&blur(abs1()), 0.0).is_err());
}

#[test]
fn curve_stays_close_away_from_zero() {
    for phi in [abs1(), Penalty::huber(nsf_core::penalty::DEFAULT_HUBER_DELTA).unwrap()] {
        let curve = penalty_curve(&blur(phi), 0.2, -1.0, 1.0, 401).unwrap();
        assert_eq!(curve.len(), 401);
        assert_eq!(curve[0].t, -1.0);
        assert_eq!(curve[400].t, 1.0);
        for p in curve.iter().filter(|p| p.t.abs() > 0.6) {
            assert!((p.blurred - p.phi).abs() < 0.05, "{p:?}");
        }
    }
}

#[test]
fn small_iid_gap() {
    let (f, z) = residual_pair(16, 16, 0.2, 8);
    let g = equivalence_gap(&f, &z, &NoiseSpec::gaussian(0.1), &Penalty::huber(0.05).unwrap(), 4000, 9).unwrap();
    assert!(g.gap < 0.01, "{g:?}");
}

#[test]
fn periodic_gap_needs_per_bin_sigma() {
    let (f, z) = residual_pair(16, 16, 0.02, 10);
    let spec = NoiseSpec::periodic(0, 4, 0.5);
    let per_bin = sigma_map_for(&spec, 16, 16).unwrap();
    let good = equivalence_gap_with(&f, &z, &spec, &abs1(), &per_bin, 4000, 11).unwrap();
    let bad = equivalence_gap_with(&f, &z, &spec, &abs1(), &per_bin.pooled(), 4000, 11).unwrap();
    assert!(good.gap < bad.gap);
    assert!(bad.gap > 0.05, "{bad:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blur_is_even(t in 0.0f64..2.0, s in 0.01f64..1.0, delta in 0.01f64..1.0, q in 1.0f64..3.0) {
        for phi in [Penalty::huber(delta).unwrap(), Penalty::abs_pow(q).unwrap()] {
            let bp = blur(phi);
            let (a, b) = (bp.eval(t, s), bp.eval(-t, s));
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn blur_minimum_sits_at_zero(s in 0.02f64..1.0, delta in 0.01f64..1.0, q in 1.0f64..3.0) {
        for phi in [Penalty::huber(delta).unwrap(), Penalty::abs_pow(q).unwrap()] {
            let bp = blur(phi);
            let at0 = bp.eval(0.0, s);
            for i in 0..=200 {
                let t = s * 10.0 * (i as f64 - 100.0) / 100.0;
                prop_assert!(bp.eval(t, s) >= at0 - 1e-12);
            }
        }
    }

    #[test]
    fn blur_grows_with_sigma_at_zero(s in 0.01f64..1.0, ds in 0.001f64..0.5, delta in 0.01f64..1.0) {
        for phi in [Penalty::huber(delta).unwrap(), abs1()] {
            let bp = blur(phi);
            prop_assert!(bp.eval(0.0, s + ds) > bp.eval(0.0, s));
        }
    }

    #[test]
    fn blur_derivative_matches_differences(t in -1.0f64..1.0, s in 0.05f64..0.5, delta in 0.01f64..0.5) {
        let bp = blur(Penalty::huber(delta).unwrap());
        let h = 1e-5;
        let fd = (bp.eval(t + h, s) - bp.eval(t - h, s)) / (2.0 * h);
        prop_assert!((fd - bp.derivative(t, s).unwrap()).abs() < 1e-6);
    }
}
