//! Fourier-domain losses, the `k = 0` stripe loss and the spatial squared error,
//! with gradients with respect to the network output.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft1d};
use crate::fourier::Fourier;
use crate::grid::{ImageGrid, Spectrum};
use crate::penalty::Penalty;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossSpec {
    /// `sum_{k,l} phi(da) + phi(db)` over the whole (redundant) spectrum.
    FourierFull(Penalty),
    /// The same sum restricted to the `k = 0` row.
    FourierK0(Penalty),
    /// `sum (f - y)^2`.
    SpatialL2,
}

impl LossSpec {
    pub fn penalty(&self) -> Option<Penalty> {
        match *self {
            LossSpec::FourierFull(p) | LossSpec::FourierK0(p) => Some(p),
            LossSpec::SpatialL2 => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.penalty() {
            Some(p) => p.validate(),
            None => Ok(()),
        }
    }
}

/// `sum_{k,l} term(k, l, a(f) - a(y), b(f) - b(y))` in row-major bin order.
pub(crate) fn spectral_sum(f: &Spectrum, y: &Spectrum, mut term: impl FnMut(usize, usize, f64, f64) -> f64) -> f64 {
    let w = f.width();
    let mut total = 0.0;
    for (i, (cf, cy)) in f.data().iter().zip(y.data()).enumerate() {
        total += term(i / w, i % w, cf.re - cy.re, cf.im - cy.im);
    }
    total
}

/// Fourier loss between two spectra.
pub fn fourier_loss(phi: &Penalty, f: &Spectrum, y: &Spectrum) -> Result<f64> {
    f.ensure_same_shape(y)?;
    Ok(spectral_sum(f, y, |_, _, da, db| phi.eval(da) + phi.eval(db)))
}

/// Loss evaluator holding transform plans for one grid shape.
#[derive(Clone, Debug)]
pub struct LossEngine {
    spec: LossSpec,
    shape: (usize, usize),
    plan: Fourier,
    row: Fft1d,
}

impl LossEngine {
    pub fn new(spec: LossSpec, height: usize, width: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            shape: (height, width),
            plan: Fourier::new(height, width),
            row: Fft1d::new(width),
        })
    }

    pub fn spec(&self) -> LossSpec {
        self.spec
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn check(&self, f: &ImageGrid, y: &ImageGrid) -> Result<()> {
        f.ensure_shape(self.shape)?;
        y.ensure_shape(self.shape)
    }

    pub fn eval(&self, f: &ImageGrid, y: &ImageGrid) -> Result<f64> {
        self.check(f, y)?;
        match self.spec {
            LossSpec::SpatialL2 => Ok(f.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum()),
            LossSpec::FourierFull(phi) => fourier_loss(&phi, &self.plan.forward(f)?, &self.plan.forward(y)?),
            LossSpec::FourierK0(phi) => {
                let d = self.k0_row_residual(f, y);
                Ok(d.iter().map(|c| phi.eval(c.re) + phi.eval(c.im)).sum())
            }
        }
    }

    pub fn grad(&self, f: &ImageGrid, y: &ImageGrid) -> Result<ImageGrid> {
        self.value_and_grad(f, y).map(|(_, g)| g)
    }

    pub fn value_and_grad(&self, f: &ImageGrid, y: &ImageGrid) -> Result<(f64, ImageGrid)> {
        self.check(f, y)?;
        let (height, width) = self.shape;
        let inv_uv = 1.0 / (height * width) as f64;
        match self.spec {
            LossSpec::SpatialL2 => {
                let d = f.sub(y)?;
                Ok((d.energy(), d.scale(2.0)))
            }
            LossSpec::FourierFull(phi) => {
                let ff = self.plan.forward(f)?;
                let fy = self.plan.forward(y)?;
                let mut value = 0.0;
                let mut g = Vec::with_capacity(height * width);
                for (cf, cy) in ff.data().iter().zip(fy.data()) {
                    let (da, db) = (cf.re - cy.re, cf.im - cy.im);
                    value += phi.eval(da) + phi.eval(db);
                    g.push(Complex64::new(phi.grad(da)?, phi.grad(db)?));
                }
                let g = Spectrum::new(height, width, g)?;
                let grad = self.plan.inverse_real(&g)?.scale(inv_uv);
                Ok((value, grad))
            }
            LossSpec::FourierK0(phi) => {
                let d = self.k0_row_residual(f, y);
                let mut value = 0.0;
                let mut g = Vec::with_capacity(width);
                for c in &d {
                    value += phi.eval(c.re) + phi.eval(c.im);
                    g.push(Complex64::new(phi.grad(c.re)?, phi.grad(c.im)?));
                }
                self.row.process(&mut g, Direction::Inverse);
                let line: Vec<f64> = g.iter().map(|c| c.re * inv_uv).collect();
                let grad = ImageGrid::from_fn(height, width, |_, v| line[v]);
                Ok((value, grad))
            }
        }
    }

    /// `F(f - y)[0, l]` for every `l`, computed from column sums.
    fn k0_row_residual(&self, f: &ImageGrid, y: &ImageGrid) -> Vec<Complex64> {
        let (height, width) = self.shape;
        let mut cols = vec![Complex64::new(0.0, 0.0); width];
        for u in 0..height {
            for ((c, a), b) in cols.iter_mut().zip(f.row(u)).zip(y.row(u)) {
                c.re += a - b;
            }
        }
        self.row.process(&mut cols, Direction::Forward);
        let scale = 1.0 / (height * width) as f64;
        for c in cols.iter_mut() {
            *c *= scale;
        }
        // exact Hermitian structure along the row
        cols[0].im = 0.0;
        if width % 2 == 0 {
            cols[width / 2].im = 0.0;
        }
        for l in 1..width.div_ceil(2) {
            let (p, q) = (cols[l], cols[width - l]);
            let re = 0.5 * (p.re + q.re);
            let im = 0.5 * (p.im - q.im);
            cols[l] = Complex64::new(re, im);
            cols[width - l] = Complex64::new(re, -im);
        }
        cols
    }
}

pub fn loss_eval(spec: &LossSpec, f: &ImageGrid, y: &ImageGrid) -> Result<f64> {
    f.ensure_same_shape(y)?;
    LossEngine::new(*spec, f.height(), f.width())?.eval(f, y)
}

pub fn loss_grad(spec: &LossSpec, f: &ImageGrid, y: &ImageGrid) -> Result<ImageGrid> {
    f.ensure_same_shape(y)?;
    LossEngine::new(*spec, f.height(), f.width())?.grad(f, y)
}

/// `sum_s loss(model(x_s), y_s)` accumulated in dataset order.
pub fn dataset_loss<M: crate::model::Model + ?Sized>(
    spec: &LossSpec,
    pairs: &[(ImageGrid, ImageGrid)],
    model: &M,
) -> Result<f64> {
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let engine = LossEngine::new(*spec, first.1.height(), first.1.width())?;
    let mut total = 0.0;
    for (x, y) in pairs {
        total += engine.eval(&model.forward(x)?, y)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_noise, NoiseSpec, RngSeed};

    fn random(h: usize, w: usize, s: u64) -> ImageGrid {
        sample_noise(&NoiseSpec::gaussian(1.0), h, w, RngSeed::new(s, 0)).unwrap()
    }

    #[test]
    fn zero_for_equal_arguments() {
        let f = random(6, 5, 1);
        for spec in [
            LossSpec::FourierFull(Penalty::Huber { delta: 0.03 }),
            LossSpec::FourierK0(Penalty::AbsPow { q: 1.0 }),
            LossSpec::SpatialL2,
        ] {
            assert_eq!(loss_eval(&spec, &f, &f).unwrap(), 0.0);
            assert!(loss_grad(&spec, &f, &f).unwrap().data().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn squared_fourier_loss_is_scaled_l2() {
        let (f, y) = (random(8, 6, 1), random(8, 6, 2));
        let full = loss_eval(&LossSpec::FourierFull(Penalty::AbsPow { q: 2.0 }), &f, &y).unwrap();
        let l2 = loss_eval(&LossSpec::SpatialL2, &f, &y).unwrap();
        assert!((full - l2 / 48.0).abs() < 1e-10 * full);
        let g = loss_grad(&LossSpec::FourierFull(Penalty::AbsPow { q: 2.0 }), &f, &y).unwrap();
        for ((g, a), b) in g.data().iter().zip(f.data()).zip(y.data()) {
            assert!((g - 2.0 * (a - b) / 48.0).abs() < 1e-10);
        }
    }

    #[test]
    fn k0_loss_ignores_zero_column_sum_differences() {
        let f = random(6, 7, 3);
        let mut d = random(6, 7, 4);
        for v in 0..7 {
            let m = (0..6).map(|u| d.get(u, v)).sum::<f64>() / 6.0;
            for u in 0..6 {
                d.set(u, v, d.get(u, v) - m);
            }
        }
        let y = f.add(&d).unwrap();
        let l = loss_eval(&LossSpec::FourierK0(Penalty::Huber { delta: 0.03 }), &f, &y).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn k0_loss_matches_full_loss_restricted_to_first_row() {
        let (f, y) = (random(6, 8, 5), random(6, 8, 6));
        let phi = Penalty::AbsPow { q: 1.5 };
        let k0 = loss_eval(&LossSpec::FourierK0(phi), &f, &y).unwrap();
        let ff = crate::fourier::dft_forward(&f);
        let fy = crate::fourier::dft_forward(&y);
        let direct: f64 = (0..8)
            .map(|l| phi.eval(ff.re(0, l) - fy.re(0, l)) + phi.eval(ff.im(0, l) - fy.im(0, l)))
            .sum();
        assert!((k0 - direct).abs() < 1e-13);
    }

    #[test]
    fn sub_linear_power_gradient_fails_on_zero_residual() {
        let f = random(4, 4, 7);
        let r = loss_grad(&LossSpec::FourierFull(Penalty::AbsPow { q: 0.5 }), &f, &f);
        assert!(matches!(r, Err(Error::NonDifferentiable { .. })));
    }
}
