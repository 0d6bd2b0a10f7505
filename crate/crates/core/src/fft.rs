//! Unnormalized complex FFTs.
//!
//! Power-of-two lengths use an iterative radix-2 kernel; every other length
//! goes through Bluestein's chirp-z reformulation on a power-of-two
//! convolution. Twiddles are evaluated directly rather than by recurrence so
//! the error stays near machine precision.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Sign of the exponent: `Forward` is `e^{-j...}`, `Inverse` is `e^{+j...}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Clone, Debug)]
pub struct Fft1d {
    len: usize,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

impl Fft1d {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let kind = if len == 1 {
            Kind::Trivial
        } else if len.is_power_of_two() {
            Kind::Radix2(Radix2::new(len))
        } else {
            Kind::Bluestein(Bluestein::new(len))
        };
        Self { len, kind }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place transform of `buf` (length must equal the plan length).
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) {
        assert_eq!(buf.len(), self.len);
        match dir {
            Direction::Forward => self.forward(buf),
            Direction::Inverse => {
                // conj(F(conj(x))) flips the exponent sign.
                for c in buf.iter_mut() {
                    *c = c.conj();
                }
                self.forward(buf);
                for c in buf.iter_mut() {
                    *c = c.conj();
                }
            }
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2(p) => p.forward(buf),
            Kind::Bluestein(p) => p.forward(buf),
        }
    }
}

#[derive(Clone, Debug)]
struct Radix2 {
    len: usize,
    // e^{-j 2 pi k / n} for k < n / 2
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        let twiddles = (0..len / 2)
            .map(|k| unit_phasor(-2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

#[derive(Clone, Debug)]
struct Bluestein {
    len: usize,
    inner: Radix2,
    // e^{-j pi k^2 / n}
    chirp: Vec<Complex64>,
    // FFT of the conjugate chirp filter, pre-scaled by 1 / m
    filter: Vec<Complex64>,
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let m = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let two_n = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let r = (k as u128 * k as u128) % two_n;
                unit_phasor(-PI * r as f64 / len as f64)
            })
            .collect();
        let mut filter = vec![Complex64::new(0.0, 0.0); m];
        filter[0] = chirp[0].conj();
        for k in 1..len {
            filter[k] = chirp[k].conj();
            filter[m - k] = chirp[k].conj();
        }
        inner.forward(&mut filter);
        let scale = 1.0 / m as f64;
        for c in filter.iter_mut() {
            *c *= scale;
        }
        Self {
            len,
            inner,
            chirp,
            filter,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let m = self.inner.len;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(&self.chirp)) {
            *w = x * c;
        }
        self.inner.forward(&mut work);
        for (w, f) in work.iter_mut().zip(&self.filter) {
            *w = (*w * f).conj();
        }
        // inverse via conjugation; the 1/m factor lives in `filter`
        self.inner.forward(&mut work);
        for k in 0..self.len {
            buf[k] = work[k].conj() * self.chirp[k];
        }
    }
}

/// Row/column plan for 2-D transforms of a fixed shape.
#[derive(Clone, Debug)]
pub struct Fft2d {
    height: usize,
    width: usize,
    rows: Fft1d,
    cols: Fft1d,
}

impl Fft2d {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: Fft1d::new(width),
            cols: Fft1d::new(height),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Unnormalized 2-D transform of row-major `data`.
    pub fn process(&self, data: &mut [Complex64], dir: Direction) {
        assert_eq!(data.len(), self.height * self.width);
        for row in data.chunks_exact_mut(self.width) {
            self.rows.process(row, dir);
        }
        if self.height > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); self.height];
            for l in 0..self.width {
                for (k, c) in column.iter_mut().enumerate() {
                    *c = data[k * self.width + l];
                }
                self.cols.process(&mut column, dir);
                for (k, c) in column.iter().enumerate() {
                    data[k * self.width + l] = *c;
                }
            }
        }
    }
}

#[inline]
fn unit_phasor(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        v * unit_phasor(sign * 2.0 * PI * ((k * t) % n) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new(libm::sin(1.3 * i as f64 + 0.2), libm::cos(0.7 * i as f64 * i as f64)))
            .collect()
    }

    #[test]
    fn matches_naive_for_many_lengths() {
        for n in [1, 2, 3, 4, 5, 6, 7, 8, 12, 15, 16, 31, 32, 45, 64, 100] {
            let x = signal(n);
            for (dir, sign) in [(Direction::Forward, -1.0), (Direction::Inverse, 1.0)] {
                let mut y = x.clone();
                Fft1d::new(n).process(&mut y, dir);
                let r = naive(&x, sign);
                for (a, b) in y.iter().zip(&r) {
                    assert!((a - b).norm() < 1e-11 * n as f64, "n={n} {a} vs {b}");
                }
            }
        }
    }
}
