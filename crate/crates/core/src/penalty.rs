//! Penalty functions and their Gaussian-blurred counterparts.
//!
//! A blurred penalty is `phi_sigma(t) = E[phi(t - sigma Z)]`, i.e. the penalty
//! convolved with a zero-mean normal density. With noisy targets, its sum over
//! all Fourier coefficients is the expected loss against the clean target.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::{is_self_conjugate, Spectrum};
use crate::quadrature::{expect_normal_piecewise, GaussHermite, GaussLegendre};
use crate::stats::VarianceMap;

/// Huber transition scale used when none is configured (intensity units on `[0, 1]` images).
pub const DEFAULT_HUBER_DELTA: f64 = 0.03;

/// Default Gauss-Hermite order for smooth penalties.
pub const DEFAULT_QUADRATURE_ORDER: usize = 61;

/// Legendre nodes per panel for penalties with kinks.
const PANEL_ORDER: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    /// `|t|^q`
    AbsPow { q: f64 },
    /// `t^2 / 2` inside `|t| <= delta`, `delta (|t| - delta / 2)` outside.
    Huber { delta: f64 },
}

impl Penalty {
    pub fn abs_pow(q: f64) -> Result<Self> {
        let p = Penalty::AbsPow { q };
        p.validate()?;
        Ok(p)
    }

    pub fn huber(delta: f64) -> Result<Self> {
        let p = Penalty::Huber { delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Penalty::AbsPow { q } if !(q.is_finite() && q > 0.0) => {
                Err(invalid("q", format!("exponent must be positive, got {q}")))
            }
            Penalty::Huber { delta } if !(delta.is_finite() && delta > 0.0) => {
                Err(invalid("delta", format!("Huber scale must be positive, got {delta}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Penalty::AbsPow { q } => {
                if q == 1.0 {
                    t.abs()
                } else if q == 2.0 {
                    t * t
                } else {
                    libm::pow(t.abs(), q)
                }
            }
            Penalty::Huber { delta } => {
                let a = t.abs();
                if a <= delta {
                    0.5 * t * t
                } else {
                    delta * (a - 0.5 * delta)
                }
            }
        }
    }

    /// Derivative; `|t|^q` with `q < 1` has none at the origin.
    #[inline]
    pub fn grad(&self, t: f64) -> Result<f64> {
        match *self {
            Penalty::AbsPow { q } => {
                if t == 0.0 {
                    if q < 1.0 {
                        Err(Error::NonDifferentiable { q })
                    } else {
                        Ok(0.0)
                    }
                } else if q == 1.0 {
                    Ok(t.signum())
                } else if q == 2.0 {
                    Ok(2.0 * t)
                } else {
                    Ok(q * libm::pow(t.abs(), q - 1.0) * t.signum())
                }
            }
            Penalty::Huber { delta } => Ok(t.clamp(-delta, delta)),
        }
    }

    /// Even integer powers are polynomials; everything else has kinks.
    pub fn is_smooth(&self) -> bool {
        match *self {
            Penalty::AbsPow { q } => q == libm::floor(q) && (q as u64) % 2 == 0,
            Penalty::Huber { .. } => false,
        }
    }

    /// Points where a derivative of some order jumps.
    pub fn kinks(&self) -> Vec<f64> {
        if self.is_smooth() {
            return Vec::new();
        }
        match *self {
            Penalty::AbsPow { .. } => alloc::vec![0.0],
            Penalty::Huber { delta } => alloc::vec![-delta, delta],
        }
    }
}

/// Per-coefficient standard deviation of the target noise.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaMap {
    /// Same deviation for every real and imaginary coefficient.
    Uniform(f64),
    /// Separate deviations for the `a` and `b` coefficient of every bin.
    PerBin {
        height: usize,
        width: usize,
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

impl SigmaMap {
    /// Deviations of the `a` and `b` coefficients; `b` is zero on self-conjugate bins.
    pub fn from_variance_map(map: &VarianceMap) -> Self {
        let (height, width) = map.shape();
        let mut a = Vec::with_capacity(height * width);
        let mut b = Vec::with_capacity(height * width);
        for k in 0..height {
            for l in 0..width {
                let (va, vb) = map.components(k, l);
                a.push(libm::sqrt(va.max(0.0)));
                b.push(if is_self_conjugate(k, l, height, width) { 0.0 } else { libm::sqrt(vb.max(0.0)) });
            }
        }
        SigmaMap::PerBin { height, width, a, b }
    }

    /// Pools a per-bin map into one deviation (root of the mean variance over all coefficients).
    pub fn pooled(&self) -> SigmaMap {
        match self {
            SigmaMap::Uniform(s) => SigmaMap::Uniform(*s),
            SigmaMap::PerBin { a, b, .. } => {
                let total: f64 = a.iter().chain(b).map(|s| s * s).sum();
                SigmaMap::Uniform(libm::sqrt(total / (a.len() + b.len()) as f64))
            }
        }
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> (f64, f64) {
        match self {
            SigmaMap::Uniform(s) => (*s, *s),
            SigmaMap::PerBin { width, a, b, .. } => (a[k * width + l], b[k * width + l]),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |s: &f64| s.is_finite() && *s >= 0.0;
        let valid = match self {
            SigmaMap::Uniform(s) => ok(s),
            SigmaMap::PerBin { a, b, .. } => a.iter().all(ok) && b.iter().all(ok),
        };
        if valid {
            Ok(())
        } else {
            Err(invalid("sigma", "deviations must be finite and non-negative"))
        }
    }
}

/// `phi * p` with `p` a zero-mean Gaussian whose deviation may vary per coefficient.
#[derive(Clone, Debug)]
pub struct BlurredPenalty {
    base: Penalty,
    sigma: SigmaMap,
    hermite: GaussHermite,
    legendre: GaussLegendre,
}

impl BlurredPenalty {
    pub fn new(base: Penalty, sigma: SigmaMap) -> Result<Self> {
        Self::with_order(base, sigma, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn with_order(base: Penalty, sigma: SigmaMap, order: usize) -> Result<Self> {
        base.validate()?;
        sigma.validate()?;
        if order == 0 {
            return Err(invalid("order", "quadrature order must be positive"));
        }
        Ok(Self {
            base,
            sigma,
            hermite: GaussHermite::new(order),
            legendre: GaussLegendre::new(PANEL_ORDER),
        })
    }

    pub fn base(&self) -> Penalty {
        self.base
    }

    pub fn sigma_map(&self) -> &SigmaMap {
        &self.sigma
    }

    pub fn order(&self) -> usize {
        self.hermite.order()
    }

    /// `E[phi(t - sigma Z)]`; exactly `phi(t)` when `sigma == 0`.
    ///
    /// Polynomial penalties use the Gauss-Hermite rule. Penalties with kinks
    /// are integrated panel-wise with the kinks as panel edges, since a
    /// single global Hermite rule converges slowly across a kink.
    pub fn eval(&self, t: f64, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return self.base.eval(t);
        }
        let phi = self.base;
        if phi.is_smooth() {
            self.hermite.expect_normal(sigma, |tau| phi.eval(t - tau))
        } else {
            let breaks: Vec<f64> = phi.kinks().iter().map(|c| t - c).collect();
            expect_normal_piecewise(&self.legendre, sigma, &breaks, |tau| phi.eval(t - tau))
        }
    }

    /// `d/dt E[phi(t - sigma Z)]`, computed as `-E[(phi(t - sigma Z) - phi(t)) Z] / sigma`
    /// so that only values of `phi` are needed.
    pub fn derivative(&self, t: f64, sigma: f64) -> Result<f64> {
        if sigma <= 0.0 {
            return self.base.grad(t);
        }
        let phi = self.base;
        let at_t = phi.eval(t);
        let s2 = sigma * sigma;
        let integrand = |tau: f64| (at_t - phi.eval(t - tau)) * tau / s2;
        Ok(if phi.is_smooth() {
            self.hermite.expect_normal(sigma, integrand)
        } else {
            let breaks: Vec<f64> = phi.kinks().iter().map(|c| t - c).collect();
            expect_normal_piecewise(&self.legendre, sigma, &breaks, integrand)
        })
    }

    /// `sum_{k,l} phi_{sigma_a}(a(f) - a(z)) + phi_{sigma_b}(b(f) - b(z))` over the full spectrum.
    pub fn loss(&self, f: &Spectrum, z: &Spectrum) -> Result<f64> {
        f.ensure_same_shape(z)?;
        if let SigmaMap::PerBin { height, width, .. } = &self.sigma {
            if (*height, *width) != f.shape() {
                return Err(Error::DimensionMismatch {
                    expected: (*height, *width),
                    got: f.shape(),
                });
            }
        }
        Ok(crate::loss::spectral_sum(f, z, |k, l, da, db| {
            let (sa, sb) = self.sigma.at(k, l);
            self.eval(da, sa) + self.eval(db, sb)
        }))
    }
}

/// Free-function form of [`BlurredPenalty::eval`].
pub fn blurred_penalty_eval(bp: &BlurredPenalty, t: f64, sigma: f64) -> f64 {
    bp.eval(t, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn closed_forms() {
        let l1 = Penalty::abs_pow(1.0).unwrap();
        assert_eq!(l1.eval(-2.0), 2.0);
        assert_eq!(l1.grad(-2.0).unwrap(), -1.0);
        let h = Penalty::huber(1.0).unwrap();
        assert_eq!(h.eval(3.0), 2.5);
        assert_eq!(h.grad(3.0).unwrap(), 1.0);
        assert_eq!(h.eval(0.5), 0.125);
        assert_eq!(h.grad(0.5).unwrap(), 0.5);
        assert_eq!(h.grad(1.0).unwrap(), 1.0);
        assert_eq!(h.grad(-1.0).unwrap(), -1.0);
    }

    #[test]
    fn sub_linear_power_has_no_derivative_at_zero() {
        let p = Penalty::abs_pow(0.5).unwrap();
        assert!(matches!(p.grad(0.0), Err(Error::NonDifferentiable { .. })));
        assert!(p.grad(0.3).is_ok());
        assert_eq!(Penalty::abs_pow(1.0).unwrap().grad(0.0).unwrap(), 0.0);
        assert!(Penalty::abs_pow(0.0).is_err());
        assert!(Penalty::huber(-1.0).is_err());
    }

    #[test]
    fn blurring_with_zero_sigma_is_identity() {
        let bp = BlurredPenalty::new(Penalty::huber(0.1).unwrap(), SigmaMap::Uniform(0.0)).unwrap();
        for t in [-1.0, -0.05, 0.0, 0.3] {
            assert_eq!(bp.eval(t, 0.0), Penalty::Huber { delta: 0.1 }.eval(t));
        }
    }

    #[test]
    fn blurred_square_adds_variance() {
        let bp = BlurredPenalty::new(Penalty::abs_pow(2.0).unwrap(), SigmaMap::Uniform(0.0)).unwrap();
        for (t, s) in [(0.0, 0.3), (1.5, 0.2), (-0.7, 2.0)] {
            assert!((bp.eval(t, s) - (t * t + s * s)).abs() < 1e-9);
            assert!((bp.derivative(t, s).unwrap() - 2.0 * t).abs() < 1e-9);
        }
    }

    #[test]
    fn blurred_abs_matches_folded_normal() {
        let bp = BlurredPenalty::new(Penalty::abs_pow(1.0).unwrap(), SigmaMap::Uniform(0.0)).unwrap();
        let s = 0.2;
        let v = bp.eval(0.0, s);
        assert!((v - s * libm::sqrt(2.0 / PI)).abs() < 1e-6);
        // derivative of E|t - sZ| is 2 Phi(t/s) - 1 = erf(t / (s sqrt 2))
        for t in [-0.3, 0.05, 0.4] {
            let d = bp.derivative(t, s).unwrap();
            assert!((d - libm::erf(t / (s * core::f64::consts::SQRT_2))).abs() < 1e-9);
        }
    }
}
