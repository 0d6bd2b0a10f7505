//! Seedable noise generators, degradations and a procedural clean-image source.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::fourier::{circular_convolve, Fourier};
use crate::grid::ImageGrid;

/// Seed plus stream id of a ChaCha8 generator. Equal seeds give bit-identical draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A child seed on a different stream, keyed by `tag`.
    pub fn derive(&self, tag: u64) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StripeAxis {
    /// `n[u,v] = s[v]`: constant down each column, spectrum on the `k = 0` row.
    #[default]
    Column,
    /// `n[u,v] = s[u]`.
    Row,
}

/// One sinusoid `A cos(2pi(k0 u/U + l0 v/V) + phi)` with `A ~ N(0, amplitude^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicComponent {
    pub k0: usize,
    pub l0: usize,
    pub amplitude: f64,
}

/// Zero-mean noise model.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    IidGaussian {
        sigma: f64,
    },
    IidUniform {
        halfwidth: f64,
    },
    IidLaplace {
        scale: f64,
    },
    /// `k ~ Poisson(peak * z)`, returns `k / peak - z`.
    PoissonCentered {
        peak: f64,
        reference: ImageGrid,
    },
    /// `n ~ N(0, alpha * z + beta)` per pixel.
    HetGaussian {
        alpha: f64,
        beta: f64,
        reference: ImageGrid,
    },
    /// `n = h (*) eta` with circular convolution and i.i.d. `eta`.
    Stationary {
        kernel: ImageGrid,
        inner: Box<NoiseSpec>,
    },
    Stripe {
        sigma: f64,
        axis: StripeAxis,
    },
    Periodic {
        components: Vec<PeriodicComponent>,
    },
    /// Sum of independent draws.
    Mixture(Vec<NoiseSpec>),
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec::IidGaussian { sigma }
    }

    pub fn column_stripes(sigma: f64) -> Self {
        NoiseSpec::Stripe {
            sigma,
            axis: StripeAxis::Column,
        }
    }

    pub fn periodic(k0: usize, l0: usize, amplitude: f64) -> Self {
        NoiseSpec::Periodic {
            components: vec![PeriodicComponent { k0, l0, amplitude }],
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(
            self,
            NoiseSpec::IidGaussian { .. } | NoiseSpec::IidUniform { .. } | NoiseSpec::IidLaplace { .. }
        )
    }

    /// Pixel variance of the i.i.d. families.
    pub fn iid_variance(&self) -> Option<f64> {
        match *self {
            NoiseSpec::IidGaussian { sigma } => Some(sigma * sigma),
            NoiseSpec::IidUniform { halfwidth } => Some(halfwidth * halfwidth / 3.0),
            NoiseSpec::IidLaplace { scale } => Some(2.0 * scale * scale),
            _ => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            NoiseSpec::IidGaussian { .. } => "gaussian",
            NoiseSpec::IidUniform { .. } => "uniform",
            NoiseSpec::IidLaplace { .. } => "laplace",
            NoiseSpec::PoissonCentered { .. } => "poisson",
            NoiseSpec::HetGaussian { .. } => "hetgaussian",
            NoiseSpec::Stationary { .. } => "stationary",
            NoiseSpec::Stripe { .. } => "stripe",
            NoiseSpec::Periodic { .. } => "periodic",
            NoiseSpec::Mixture(_) => "mixture",
        }
    }

    /// Checks parameters against a `height x width` target grid.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        match self {
            NoiseSpec::IidGaussian { sigma } => non_negative("sigma", *sigma),
            NoiseSpec::IidUniform { halfwidth } => non_negative("halfwidth", *halfwidth),
            NoiseSpec::IidLaplace { scale } => non_negative("scale", *scale),
            NoiseSpec::PoissonCentered { peak, reference } => {
                reference.ensure_shape((height, width))?;
                if !(peak.is_finite() && *peak > 0.0) {
                    return Err(invalid("peak", format!("must be positive, got {peak}")));
                }
                if reference.min() < 0.0 {
                    return Err(invalid("reference", "Poisson reference must be non-negative"));
                }
                Ok(())
            }
            NoiseSpec::HetGaussian {
                alpha,
                beta,
                reference,
            } => {
                reference.ensure_shape((height, width))?;
                non_negative("alpha", *alpha)?;
                non_negative("beta", *beta)?;
                let worst = reference
                    .data()
                    .iter()
                    .map(|z| alpha * z + beta)
                    .fold(f64::INFINITY, f64::min);
                if worst < 0.0 {
                    return Err(invalid(
                        "alpha",
                        format!("variance law alpha*z+beta is negative ({worst})"),
                    ));
                }
                Ok(())
            }
            NoiseSpec::Stationary { kernel, inner } => {
                kernel.ensure_shape((height, width))?;
                if !inner.is_iid() {
                    return Err(invalid("inner", "stationary noise needs an i.i.d. inner family"));
                }
                inner.validate(height, width)
            }
            NoiseSpec::Stripe { sigma, .. } => non_negative("sigma", *sigma),
            NoiseSpec::Periodic { components } => {
                for c in components {
                    non_negative("amplitude", c.amplitude)?;
                    if c.k0 >= height || c.l0 >= width {
                        return Err(invalid(
                            "components",
                            format!("frequency ({}, {}) outside {height}x{width}", c.k0, c.l0),
                        ));
                    }
                }
                Ok(())
            }
            NoiseSpec::Mixture(parts) => parts.iter().try_for_each(|p| p.validate(height, width)),
        }
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}

/// Draws one realization of `spec` on a `height x width` grid.
pub fn sample_noise(spec: &NoiseSpec, height: usize, width: usize, seed: RngSeed) -> Result<ImageGrid> {
    spec.validate(height, width)?;
    Ok(draw(spec, height, width, seed))
}

fn draw(spec: &NoiseSpec, height: usize, width: usize, seed: RngSeed) -> ImageGrid {
    let mut rng = seed.rng();
    let n = height * width;
    match spec {
        NoiseSpec::IidGaussian { sigma } => {
            let normal = Normal::new(0.0, *sigma).expect("validated");
            grid(height, width, (0..n).map(|_| normal.sample(&mut rng)).collect())
        }
        NoiseSpec::IidUniform { halfwidth } => grid(
            height,
            width,
            (0..n)
                .map(|_| halfwidth * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        ),
        NoiseSpec::IidLaplace { scale } => grid(
            height,
            width,
            (0..n).map(|_| laplace(&mut rng, *scale)).collect(),
        ),
        NoiseSpec::PoissonCentered { peak, reference } => grid(
            height,
            width,
            reference
                .data()
                .iter()
                .map(|&z| {
                    let lambda = peak * z;
                    let k = if lambda > 0.0 {
                        Poisson::new(lambda).expect("positive rate").sample(&mut rng)
                    } else {
                        0.0
                    };
                    k / peak - z
                })
                .collect(),
        ),
        NoiseSpec::HetGaussian {
            alpha,
            beta,
            reference,
        } => {
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            grid(
                height,
                width,
                reference
                    .data()
                    .iter()
                    .map(|&z| libm::sqrt((alpha * z + beta).max(0.0)) * unit.sample(&mut rng))
                    .collect(),
            )
        }
        NoiseSpec::Stationary { kernel, inner } => {
            let eta = draw(inner, height, width, seed);
            circular_convolve(kernel, &eta).expect("validated shape")
        }
        NoiseSpec::Stripe { sigma, axis } => {
            let normal = Normal::new(0.0, *sigma).expect("validated");
            match axis {
                StripeAxis::Column => {
                    let s: Vec<f64> = (0..width).map(|_| normal.sample(&mut rng)).collect();
                    ImageGrid::from_fn(height, width, |_, v| s[v])
                }
                StripeAxis::Row => {
                    let s: Vec<f64> = (0..height).map(|_| normal.sample(&mut rng)).collect();
                    ImageGrid::from_fn(height, width, |u, _| s[u])
                }
            }
        }
        NoiseSpec::Periodic { components } => {
            let mut out = ImageGrid::zeros(height, width);
            for c in components {
                let amp = Normal::new(0.0, c.amplitude).expect("validated").sample(&mut rng);
                let phase = 2.0 * PI * rng.random::<f64>();
                for u in 0..height {
                    for v in 0..width {
                        let cycles = ((c.k0 * u) % height) as f64 / height as f64
                            + ((c.l0 * v) % width) as f64 / width as f64;
                        let val = out.get(u, v) + amp * libm::cos(2.0 * PI * cycles + phase);
                        out.set(u, v, val);
                    }
                }
            }
            out
        }
        NoiseSpec::Mixture(parts) => {
            let mut out = ImageGrid::zeros(height, width);
            for (i, p) in parts.iter().enumerate() {
                let d = draw(p, height, width, seed.derive(i as u64));
                out.add_scaled(&d, 1.0).expect("same shape");
            }
            out
        }
    }
}

fn grid(height: usize, width: usize, data: Vec<f64>) -> ImageGrid {
    ImageGrid::new(height, width, data).expect("finite samples")
}

fn laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * libm::log(tail);
        }
    }
}

/// How the network input is produced from the clean image.
#[derive(Clone, Debug, PartialEq)]
pub enum DegradationSpec {
    /// Denoising: `x = z + n_x`.
    Identity { noise: Option<NoiseSpec> },
    /// Deblurring: `x = h (*) z + n_x`.
    Blur {
        kernel: ImageGrid,
        noise: Option<NoiseSpec>,
    },
}

const INPUT_STREAM: u64 = 0x1;
const TARGET_STREAM: u64 = 0x2;

/// Builds `(x, y)` from a clean image: `x` from the degradation, `y = z + n`
/// with `n` drawn on a stream independent of every draw used for `x`.
pub fn make_training_pair(
    clean: &ImageGrid,
    degradation: &DegradationSpec,
    target_noise: &NoiseSpec,
    seed: RngSeed,
) -> Result<(ImageGrid, ImageGrid)> {
    let (h, w) = clean.shape();
    let (base, input_noise) = match degradation {
        DegradationSpec::Identity { noise } => (clean.clone(), noise),
        DegradationSpec::Blur { kernel, noise } => (circular_convolve(kernel, clean)?, noise),
    };
    let x = match input_noise {
        Some(spec) => base.add(&sample_noise(spec, h, w, seed.derive(INPUT_STREAM))?)?,
        None => base,
    };
    let y = clean.add(&sample_noise(target_noise, h, w, seed.derive(TARGET_STREAM))?)?;
    Ok((x, y))
}

/// Procedural grayscale image in `[0, 1]`: a low-pass textured background with
/// `complexity` axis-aligned rectangles and discs of random level painted on top.
pub fn gen_clean(seed: RngSeed, height: usize, width: usize, complexity: usize) -> Result<ImageGrid> {
    if complexity == 0 {
        return Err(invalid("complexity", "must be at least 1"));
    }
    let mut rng = seed.rng();
    let background = lowpass_texture(&mut rng, height, width);
    let mut img = background.map(|t| 0.5 + 0.12 * t);

    let min_dim = height.min(width) as f64;
    for _ in 0..complexity {
        let level = 0.1 + 0.8 * rng.random::<f64>();
        let texture_gain = 0.5 * rng.random::<f64>();
        let cu = rng.random::<f64>() * height as f64;
        let cv = rng.random::<f64>() * width as f64;
        let disc = rng.random::<f64>() < 0.4;
        let a = min_dim * (0.05 + 0.15 * rng.random::<f64>());
        let b = min_dim * (0.05 + 0.15 * rng.random::<f64>());
        for u in 0..height {
            for v in 0..width {
                let du = u as f64 + 0.5 - cu;
                let dv = v as f64 + 0.5 - cv;
                let inside = if disc {
                    du * du + dv * dv <= a * a
                } else {
                    du.abs() <= a && dv.abs() <= b
                };
                if inside {
                    img.set(u, v, level + 0.12 * texture_gain * background.get(u, v));
                }
            }
        }
    }
    Ok(img.map(|x| x.clamp(0.0, 1.0)))
}

/// Unit-variance Gaussian-filtered white noise.
fn lowpass_texture<R: Rng>(rng: &mut R, height: usize, width: usize) -> ImageGrid {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white = grid(
        height,
        width,
        (0..height * width).map(|_| normal.sample(rng)).collect(),
    );
    let fourier = Fourier::new(height, width);
    let mut spec = fourier.forward(&white).expect("shape");
    let cutoff = 0.06;
    for k in 0..height {
        for l in 0..width {
            let fk = signed_freq(k, height);
            let fl = signed_freq(l, width);
            let gain = libm::exp(-(fk * fk + fl * fl) / (2.0 * cutoff * cutoff));
            let c = spec.get(k, l) * gain;
            spec.set(k, l, c);
        }
    }
    spec.set(0, 0, Complex64::new(0.0, 0.0));
    let smooth = fourier.inverse_real(&spec).expect("shape");
    let sd = libm::sqrt(smooth.energy() / smooth.len() as f64);
    if sd > 0.0 {
        smooth.scale(1.0 / sd)
    } else {
        smooth
    }
}

/// Frequency in cycles per sample, in `[-0.5, 0.5)`.
pub(crate) fn signed_freq(k: usize, n: usize) -> f64 {
    let k = if 2 * k >= n { k as f64 - n as f64 } else { k as f64 };
    k / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{box_kernel, dft_forward};

    #[test]
    fn identical_seeds_reproduce_bits() {
        let spec = NoiseSpec::Mixture(vec![NoiseSpec::gaussian(0.3), NoiseSpec::IidLaplace { scale: 0.1 }]);
        let a = sample_noise(&spec, 8, 8, RngSeed::new(3, 9)).unwrap();
        let b = sample_noise(&spec, 8, 8, RngSeed::new(3, 9)).unwrap();
        let c = sample_noise(&spec, 8, 8, RngSeed::new(3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn column_stripes_are_constant_down_columns() {
        let n = sample_noise(&NoiseSpec::column_stripes(1.0), 32, 32, RngSeed::new(1, 0)).unwrap();
        for u in 1..32 {
            assert_eq!(n.row(u), n.row(0));
        }
        assert_eq!(n.row(0), n.row(31));
    }

    #[test]
    fn row_stripes_are_constant_along_rows() {
        let spec = NoiseSpec::Stripe {
            sigma: 1.0,
            axis: StripeAxis::Row,
        };
        let n = sample_noise(&spec, 5, 7, RngSeed::new(1, 0)).unwrap();
        for u in 0..5 {
            assert!(n.row(u).iter().all(|&x| x == n.get(u, 0)));
        }
    }

    #[test]
    fn stationary_equals_explicit_convolution() {
        let inner = NoiseSpec::IidUniform { halfwidth: 1.0 };
        let kernel = box_kernel(16, 16, 3);
        let spec = NoiseSpec::Stationary {
            kernel: kernel.clone(),
            inner: Box::new(inner.clone()),
        };
        let seed = RngSeed::new(11, 4);
        let direct = sample_noise(&spec, 16, 16, seed).unwrap();
        let manual = circular_convolve(&kernel, &sample_noise(&inner, 16, 16, seed).unwrap()).unwrap();
        assert_eq!(direct, manual);
    }

    #[test]
    fn periodic_support_is_sparse() {
        let spec = NoiseSpec::Periodic {
            components: vec![
                PeriodicComponent { k0: 0, l0: 8, amplitude: 0.5 },
                PeriodicComponent { k0: 3, l0: 5, amplitude: 0.5 },
            ],
        };
        for s in 0..5 {
            let f = dft_forward(&sample_noise(&spec, 32, 32, RngSeed::new(s, 0)).unwrap());
            let support = [(0, 8), (0, 24), (3, 5), (29, 27)];
            for k in 0..32 {
                for l in 0..32 {
                    if !support.contains(&(k, l)) {
                        assert!(f.get(k, l).norm() < 1e-12, "leak at ({k},{l})");
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(sample_noise(&NoiseSpec::gaussian(-1.0), 4, 4, RngSeed::new(0, 0)).is_err());
        let z = ImageGrid::filled(3, 3, 0.5);
        let spec = NoiseSpec::HetGaussian {
            alpha: 0.1,
            beta: 0.0,
            reference: z,
        };
        assert!(matches!(
            sample_noise(&spec, 4, 4, RngSeed::new(0, 0)),
            Err(crate::Error::DimensionMismatch { .. })
        ));
        let stat = NoiseSpec::Stationary {
            kernel: ImageGrid::impulse(4, 4),
            inner: Box::new(NoiseSpec::column_stripes(1.0)),
        };
        assert!(sample_noise(&stat, 4, 4, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn poisson_is_centered_on_reference() {
        let z = ImageGrid::filled(1, 1, 0.0);
        let spec = NoiseSpec::PoissonCentered { peak: 10.0, reference: z };
        assert_eq!(sample_noise(&spec, 1, 1, RngSeed::new(0, 0)).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn training_pair_streams_differ() {
        let z = ImageGrid::filled(8, 8, 0.5);
        let noise = NoiseSpec::gaussian(0.1);
        let deg = DegradationSpec::Identity { noise: Some(noise.clone()) };
        let (x, y) = make_training_pair(&z, &deg, &noise, RngSeed::new(5, 0)).unwrap();
        assert!(x.data().iter().zip(y.data()).all(|(a, b)| a != b));
    }

    #[test]
    fn unit_blur_without_noise_is_exact() {
        let z = gen_clean(RngSeed::new(2, 0), 16, 16, 3).unwrap();
        let deg = DegradationSpec::Blur {
            kernel: ImageGrid::impulse(16, 16),
            noise: None,
        };
        let (x, _) = make_training_pair(&z, &deg, &NoiseSpec::gaussian(0.1), RngSeed::new(0, 0)).unwrap();
        assert_eq!(x, z);
    }

    #[test]
    fn clean_images_are_bounded_and_deterministic() {
        for s in 0..10 {
            let a = gen_clean(RngSeed::new(s, 0), 24, 40, 7).unwrap();
            assert!(a.min() >= 0.0 && a.max() <= 1.0);
            assert_eq!(a, gen_clean(RngSeed::new(s, 0), 24, 40, 7).unwrap());
        }
        assert!(gen_clean(RngSeed::new(0, 0), 8, 8, 0).is_err());
    }
}
