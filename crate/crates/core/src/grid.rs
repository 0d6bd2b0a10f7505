//! Real rasters and complex spectra.
//!
//! Both types are row-major `height x width` arrays. Spatial indices are
//! `(u, v)`, frequency indices `(k, l)`; `u`/`k` run over rows.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A real-valued `height x width` raster.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    /// Wraps row-major data, checking the shape and that every value is finite.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::InvalidGrid {
                height,
                width,
                reason: "data length differs from height * width",
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid {
                height,
                width,
                reason: "non-finite value",
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for u in 0..height {
            for v in 0..width {
                data.push(f(u, v));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    /// Unit impulse at `(0, 0)`.
    pub fn impulse(height: usize, width: usize) -> Self {
        let mut g = Self::zeros(height, width);
        g.data[0] = 1.0;
        g
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.width + v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        self.data[u * self.width + v] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.width..(u + 1) * self.width]
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() == shape {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: shape,
                got: self.shape(),
            })
        }
    }

    pub fn ensure_same_shape(&self, other: &ImageGrid) -> Result<()> {
        other.ensure_shape(self.shape())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise `f(self, other)`; shapes must agree.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> Result<ImageGrid> {
        self.ensure_same_shape(other)?;
        Ok(ImageGrid {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> ImageGrid {
        self.map(|x| x * s)
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &ImageGrid, s: f64) -> Result<()> {
        self.ensure_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Sum of squares.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rectangular window starting at `(u0, v0)`, wrapping around the borders.
    pub fn crop_wrapped(&self, u0: usize, v0: usize, height: usize, width: usize) -> ImageGrid {
        ImageGrid::from_fn(height, width, |u, v| {
            self.get((u0 + u) % self.height, (v0 + v) % self.width)
        })
    }
}

/// A complex `height x width` spectrum. Real parts are the `a` coefficients,
/// imaginary parts the `b` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims(height, width)?;
        if data.len() != height * width {
            return Err(Error::InvalidGrid {
                height,
                width,
                reason: "data length differs from height * width",
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "spectrum dimensions must be positive");
        Self {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    /// Builds a spectrum from separate real (`a`) and imaginary (`b`) planes.
    pub fn from_parts(height: usize, width: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidGrid {
                height,
                width,
                reason: "real and imaginary planes differ in length",
            });
        }
        let data = re
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        Self::new(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.width + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, value: Complex64) {
        self.data[k * self.width + l] = value;
    }

    /// Real coefficient `a[k, l]`.
    #[inline]
    pub fn re(&self, k: usize, l: usize) -> f64 {
        self.get(k, l).re
    }

    /// Imaginary coefficient `b[k, l]`.
    #[inline]
    pub fn im(&self, k: usize, l: usize) -> f64 {
        self.get(k, l).im
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn ensure_same_shape(&self, other: &Spectrum) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: other.shape(),
            })
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Spectrum) -> Result<Spectrum> {
        self.ensure_same_shape(other)?;
        Ok(Spectrum {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// `sum |F[k,l]|^2`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn conjugate_of(&self, k: usize, l: usize) -> (usize, usize) {
        conjugate_bin(k, l, self.height, self.width)
    }

    /// Largest deviation from `F[k,l] = conj(F[-k,-l])`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.height {
            for l in 0..self.width {
                let (kc, lc) = self.conjugate_of(k, l);
                let d = self.get(k, l) - self.get(kc, lc).conj();
                worst = worst.max(d.re.abs()).max(d.im.abs());
            }
        }
        worst
    }

    /// Replaces every conjugate pair by its Hermitian average, which also
    /// zeroes the imaginary part of self-conjugate bins.
    pub fn symmetrize(&mut self) {
        for k in 0..self.height {
            for l in 0..self.width {
                let (kc, lc) = self.conjugate_of(k, l);
                let i = k * self.width + l;
                let j = kc * self.width + lc;
                if j < i {
                    continue;
                }
                let avg = (self.data[i] + self.data[j].conj()) * 0.5;
                self.data[i] = avg;
                self.data[j] = avg.conj();
            }
        }
    }
}

/// Index of the Hermitian partner `((U - k) mod U, (V - l) mod V)`.
#[inline]
pub fn conjugate_bin(k: usize, l: usize, height: usize, width: usize) -> (usize, usize) {
    ((height - k) % height, (width - l) % width)
}

/// True for bins that are their own Hermitian partner (`b` is identically zero there).
#[inline]
pub fn is_self_conjugate(k: usize, l: usize, height: usize, width: usize) -> bool {
    conjugate_bin(k, l, height, width) == (k, l)
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        Err(Error::InvalidGrid {
            height,
            width,
            reason: "dimensions must be positive",
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(ImageGrid::new(0, 3, vec![]).is_err());
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(ImageGrid::new(1, 2, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn conjugate_indices_wrap() {
        assert_eq!(conjugate_bin(0, 0, 4, 6), (0, 0));
        assert_eq!(conjugate_bin(1, 2, 4, 6), (3, 4));
        assert!(is_self_conjugate(2, 3, 4, 6));
        assert!(!is_self_conjugate(0, 1, 4, 6));
    }

    #[test]
    fn symmetrize_zeroes_self_conjugate_imaginary_parts() {
        let mut s = Spectrum::zeros(2, 2);
        s.set(0, 0, Complex64::new(1.0, 0.5));
        s.set(1, 1, Complex64::new(2.0, -0.25));
        s.symmetrize();
        assert_eq!(s.im(0, 0), 0.0);
        assert_eq!(s.im(1, 1), 0.0);
        assert_eq!(s.hermitian_deviation(), 0.0);
    }

    #[test]
    fn wrapped_crop() {
        let g = ImageGrid::from_fn(3, 3, |u, v| (u * 3 + v) as f64);
        let c = g.crop_wrapped(2, 2, 2, 2);
        assert_eq!(c.data(), &[8.0, 6.0, 2.0, 0.0]);
    }
}
