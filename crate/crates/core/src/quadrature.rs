//! Gaussian quadrature rules and Gaussian expectations of piecewise-smooth functions.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss-Hermite rule for `int e^{-x^2} f(x) dx` over the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes and weights of an `n`-point rule (exact for polynomials up to degree `2n - 1`),
    /// found by Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = 1.0 / libm::pow(PI, 0.25);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => libm::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -0.16667),
                1 => z - 1.14 * libm::pow(nf, 0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            for _ in 0..100 {
                let (p1, p2) = hermite_orthonormal(n, z, pim4);
                let z1 = z;
                z = z1 - p1 / (libm::sqrt(2.0 * nf) * p2);
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, p2) = hermite_orthonormal(n, z, pim4);
            let pp = libm::sqrt(2.0 * nf) * p2;
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int e^{-x^2} f(x) dx`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `E[f(sigma * Z)]` for standard normal `Z`.
    pub fn expect_normal(&self, sigma: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let s = core::f64::consts::SQRT_2 * sigma;
        self.integrate(|x| f(s * x)) / libm::sqrt(PI)
    }
}

/// Returns `(p_n(z), p_{n-1}(z))` of the orthonormal Hermite family.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * libm::sqrt(2.0 / jf) * p2 - libm::sqrt((jf - 1.0) / jf) * p3;
    }
    (p1, p2)
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 1..=n.div_ceil(2) {
            let mut z = libm::cos(PI * (i as f64 - 0.25) / (nf + 0.5));
            for _ in 0..100 {
                let (p1, p2) = legendre(n, z);
                let z1 = z;
                z = z1 - p1 / (nf * (z * p1 - p2) / (z * z - 1.0));
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            let (p1, p2) = legendre(n, z);
            let pp = nf * (z * p1 - p2) / (z * z - 1.0);
            nodes[i - 1] = -z;
            nodes[n - i] = z;
            weights[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - i] = weights[i - 1];
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_a^b f(x) dx`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
    }
    (p1, p2)
}

/// Half-width of the integration window, in standard deviations.
const TRUNCATION: f64 = 12.0;

/// `E[f(sigma * Z)]` for a function that is smooth except at `breaks`.
///
/// The window `[-12 sigma, 12 sigma]` is cut at every break and then into
/// panels no wider than `sigma`; each panel gets the Legendre rule.
pub fn expect_normal_piecewise(
    rule: &GaussLegendre,
    sigma: f64,
    breaks: &[f64],
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    debug_assert!(sigma > 0.0);
    let lo = -TRUNCATION * sigma;
    let hi = TRUNCATION * sigma;
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(lo);
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    cuts.sort_by(|a, b| a.total_cmp(b));

    let norm = 1.0 / (sigma * libm::sqrt(2.0 * PI));
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let panels = libm::ceil((b - a) / sigma).max(1.0) as usize;
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let pa = a + p as f64 * width;
            let pb = if p + 1 == panels { b } else { pa + width };
            total += rule.integrate(pa, pb, |tau| f(tau) * libm::exp(-tau * tau * inv2s2));
        }
    }
    total * norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [1, 2, 5, 20, 61, 100] {
            let gh = GaussHermite::new(n);
            let w: f64 = gh.weights().iter().sum();
            assert!((w - libm::sqrt(PI)).abs() < 1e-12, "n={n} sum={w}");
            if n >= 3 {
                let m2 = gh.expect_normal(1.0, |x| x * x);
                let m4 = gh.expect_normal(1.0, |x| x * x * x * x);
                assert!((m2 - 1.0).abs() < 1e-12);
                assert!((m4 - 3.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn hermite_against_known_integral() {
        let gh = GaussHermite::new(20);
        let v = gh.integrate(libm::cos);
        assert!((v - libm::sqrt(PI) / libm::exp(0.25)).abs() < 1e-14);
    }

    #[test]
    fn legendre_polynomial_exactness() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| libm::pow(x, 15.0));
        assert!((v - libm::pow(2.0, 16.0) / 16.0).abs() < 1e-9);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_expectation_of_abs() {
        let gl = GaussLegendre::new(16);
        let v = expect_normal_piecewise(&gl, 0.2, &[0.0], f64::abs);
        assert!((v - 0.2 * libm::sqrt(2.0 / PI)).abs() < 1e-14);
    }
}
