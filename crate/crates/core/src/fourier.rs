//! The normalized 2-D DFT used throughout the crate.
//!
//! `F[k,l] = 1/(UV) * sum_{u,v} x[u,v] e^{-j2pi(ku/U + lv/V)}` on the forward
//! side and no factor on the inverse side. Correlation kernels use the
//! unnormalized transform so that `dft_forward(h (*) x) = kernel_transform(h) .
//! dft_forward(x)` holds exactly for circular convolution.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft2d};
use crate::grid::{ImageGrid, Spectrum};

/// Tolerance on the imaginary residue of an inverse transform.
pub const HERMITIAN_TOLERANCE: f64 = 1e-6;

/// Reusable transform plan for one grid shape.
#[derive(Clone, Debug)]
pub struct Fourier {
    plan: Fft2d,
}

impl PartialEq for Fourier {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }
}

impl Fourier {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            plan: Fft2d::new(height, width),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.plan.shape()
    }

    pub fn forward(&self, x: &ImageGrid) -> Result<Spectrum> {
        x.ensure_shape(self.shape())?;
        let mut spec = self.unnormalized(x);
        let scale = 1.0 / x.len() as f64;
        for c in spec.data_mut() {
            *c *= scale;
        }
        Ok(spec)
    }

    pub fn kernel(&self, h: &ImageGrid) -> Result<Spectrum> {
        h.ensure_shape(self.shape())?;
        Ok(self.unnormalized(h))
    }

    fn unnormalized(&self, x: &ImageGrid) -> Spectrum {
        let (height, width) = x.shape();
        let mut data: Vec<Complex64> = x.data().iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.plan.process(&mut data, Direction::Forward);
        let mut spec = Spectrum::new(height, width, data).expect("shape checked");
        spec.symmetrize();
        spec
    }

    pub fn inverse(&self, spec: &Spectrum) -> Result<ImageGrid> {
        let (re, residue) = self.inverse_parts(spec)?;
        if residue > HERMITIAN_TOLERANCE {
            return Err(Error::HermitianViolation { residue });
        }
        ImageGrid::new(spec.height(), spec.width(), re)
    }

    /// Real part of the unnormalized inverse, ignoring any imaginary residue.
    /// This is the adjoint used by the loss gradients.
    pub fn inverse_real(&self, spec: &Spectrum) -> Result<ImageGrid> {
        let (re, _) = self.inverse_parts(spec)?;
        ImageGrid::new(spec.height(), spec.width(), re)
    }

    fn inverse_parts(&self, spec: &Spectrum) -> Result<(Vec<f64>, f64)> {
        if spec.shape() != self.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: spec.shape(),
            });
        }
        let mut data = spec.data().to_vec();
        self.plan.process(&mut data, Direction::Inverse);
        let residue = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        Ok((data.into_iter().map(|c| c.re).collect(), residue))
    }
}

/// Normalized forward DFT (carries the `1/UV` factor).
pub fn dft_forward(x: &ImageGrid) -> Spectrum {
    let (h, w) = x.shape();
    Fourier::new(h, w).forward(x).expect("plan built for this shape")
}

/// Inverse of [`dft_forward`]; fails when the spectrum is not Hermitian.
pub fn dft_inverse(spec: &Spectrum) -> Result<ImageGrid> {
    let (h, w) = spec.shape();
    Fourier::new(h, w).inverse(spec)
}

/// Unnormalized transform of a correlation kernel laid out on the full grid.
pub fn kernel_transform(h: &ImageGrid) -> Spectrum {
    let (height, width) = h.shape();
    Fourier::new(height, width).kernel(h).expect("plan built for this shape")
}

/// `(h (*) x)[u,v] = sum_{s,t} h[s,t] x[(u-s) mod U, (v-t) mod V]`.
///
/// Evaluated directly over the non-zero taps of `h`, so compact kernels are cheap
/// and the result does not depend on any transform implementation.
pub fn circular_convolve(h: &ImageGrid, x: &ImageGrid) -> Result<ImageGrid> {
    h.ensure_same_shape(x)?;
    let (height, width) = x.shape();
    let mut out = ImageGrid::zeros(height, width);
    for s in 0..height {
        for t in 0..width {
            let w = h.get(s, t);
            if w == 0.0 {
                continue;
            }
            for u in 0..height {
                let src = x.row((u + height - s) % height);
                let dst = &mut out.data_mut()[u * width..(u + 1) * width];
                // columns v >= t read src[v - t]; the first t wrap around
                for v in 0..t {
                    dst[v] += w * src[v + width - t];
                }
                for v in t..width {
                    dst[v] += w * src[v - t];
                }
            }
        }
    }
    Ok(out)
}

/// Kernel with the given `(du, dv, weight)` taps, offsets taken modulo the grid.
pub fn kernel_from_taps(height: usize, width: usize, taps: &[(isize, isize, f64)]) -> ImageGrid {
    let mut h = ImageGrid::zeros(height, width);
    for &(du, dv, w) in taps {
        let u = du.rem_euclid(height as isize) as usize;
        let v = dv.rem_euclid(width as isize) as usize;
        let old = h.get(u, v);
        h.set(u, v, old + w);
    }
    h
}

/// Centered `size x size` box kernel with unit sum.
pub fn box_kernel(height: usize, width: usize, size: usize) -> ImageGrid {
    let r = (size / 2) as isize;
    let w = 1.0 / (size * size) as f64;
    let mut taps = Vec::with_capacity(size * size);
    for du in -r..(size as isize - r) {
        for dv in -r..(size as isize - r) {
            taps.push((du, dv, w));
        }
    }
    kernel_from_taps(height, width, &taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_image_has_only_dc() {
        let x = ImageGrid::filled(4, 4, 3.0);
        let f = dft_forward(&x);
        assert_eq!(f.get(0, 0), Complex64::new(3.0, 0.0));
        for k in 0..4 {
            for l in 0..4 {
                if (k, l) != (0, 0) {
                    assert!(f.get(k, l).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn impulse_spectrum_is_flat() {
        let f = dft_forward(&ImageGrid::impulse(4, 4));
        for c in f.data() {
            assert!((c - Complex64::new(0.0625, 0.0)).norm() < 1e-16);
        }
    }

    #[test]
    fn row_cosine_lands_on_two_bins() {
        let x = ImageGrid::from_fn(8, 8, |u, _| libm::cos(2.0 * core::f64::consts::PI * u as f64 / 8.0));
        let f = dft_forward(&x);
        for k in 0..8 {
            for l in 0..8 {
                let expect = if l == 0 && (k == 1 || k == 7) { 0.5 } else { 0.0 };
                assert!((f.re(k, l) - expect).abs() < 1e-12);
                assert!(f.im(k, l).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_of_dc_only_is_constant() {
        let mut f = Spectrum::zeros(3, 5);
        f.set(0, 0, Complex64::new(0.7, 0.0));
        let x = dft_inverse(&f).unwrap();
        assert!(x.data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn non_hermitian_spectrum_is_rejected() {
        let mut f = Spectrum::zeros(4, 4);
        f.set(1, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(dft_inverse(&f), Err(Error::HermitianViolation { .. })));
    }

    #[test]
    fn identity_and_column_kernels() {
        let id = kernel_transform(&ImageGrid::impulse(5, 6));
        assert!(id.data().iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let col = ImageGrid::from_fn(8, 8, |_, v| if v == 0 { 1.0 / 8.0 } else { 0.0 });
        let f = kernel_transform(&col);
        for k in 0..8 {
            for l in 0..8 {
                let expect = if k == 0 { 1.0 } else { 0.0 };
                assert!((f.get(k, l) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn box_kernel_sums_to_one() {
        let h = box_kernel(7, 9, 3);
        assert!((h.sum() - 1.0).abs() < 1e-15);
        assert_eq!(h.get(6, 8), 1.0 / 9.0);
        assert_eq!(h.get(2, 2), 0.0);
    }

    #[test]
    fn convolving_with_impulse_is_identity() {
        let x = ImageGrid::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = circular_convolve(&ImageGrid::impulse(2, 3), &x).unwrap();
        assert_eq!(x, y);
        let shift = kernel_from_taps(2, 3, &[(0, 1, 1.0)]);
        let y = circular_convolve(&shift, &x).unwrap();
        assert_eq!(y.data(), &[3.0, 1.0, 2.0, 6.0, 4.0, 5.0]);
    }
}
