//! Monte-Carlo checks that the expected noisy-target Fourier loss equals the
//! clean-target loss under the blurred penalty, and that the blurred penalty is
//! minimized at zero residual.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{invalid, Result};
use crate::fourier::Fourier;
use crate::grid::ImageGrid;
use crate::loss::fourier_loss;
use crate::noise::{sample_noise, NoiseSpec};
use crate::penalty::{BlurredPenalty, Penalty, SigmaMap};
use crate::stats::{mc_chunks, realization_seed, theoretical_variance_map};

/// Running mean and squared deviation of scalar draws.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarMoments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ScalarMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &ScalarMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        libm::sqrt(self.m2 / (n - 1.0) / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: u64,
}

impl From<ScalarMoments> for McEstimate {
    fn from(m: ScalarMoments) -> Self {
        Self {
            mean: m.mean,
            std_error: m.std_error(),
            draws: m.count,
        }
    }
}

/// Fourier losses `L(f, z + n_i)` for draws `range`, accumulated in index order.
pub fn mc_loss_range(
    f: &ImageGrid,
    z: &ImageGrid,
    spec: &NoiseSpec,
    phi: &Penalty,
    range: Range<u64>,
    seed: u64,
) -> Result<ScalarMoments> {
    f.ensure_same_shape(z)?;
    phi.validate()?;
    let (h, w) = f.shape();
    spec.validate(h, w)?;
    let plan = Fourier::new(h, w);
    let ff = plan.forward(f)?;
    let mut acc = ScalarMoments::default();
    for i in range {
        let y = z.add(&sample_noise(spec, h, w, realization_seed(seed, i))?)?;
        acc.push(fourier_loss(phi, &ff, &plan.forward(&y)?)?);
    }
    Ok(acc)
}

/// Monte-Carlo estimate of `E[L_phi(f, z + n)]` over `m` independent draws of `n`.
pub fn mc_expected_loss(
    f: &ImageGrid,
    z: &ImageGrid,
    spec: &NoiseSpec,
    phi: &Penalty,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(invalid("M", format!("need at least 2 draws, got {m}")));
    }
    let mut total = ScalarMoments::default();
    for range in mc_chunks(m as u64) {
        total.merge(&mc_loss_range(f, z, spec, phi, range, seed)?);
    }
    Ok(total.into())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquivalenceGap {
    /// `|MC mean - blurred loss| / blurred loss`.
    pub gap: f64,
    pub mc: McEstimate,
    pub blurred_loss: f64,
}

/// Per-coefficient deviations of `spec` from its closed-form variance map.
pub fn sigma_map_for(spec: &NoiseSpec, height: usize, width: usize) -> Result<SigmaMap> {
    Ok(SigmaMap::from_variance_map(&theoretical_variance_map(spec, height, width)?))
}

/// Gap against the blurred penalty built from the per-bin deviations of `spec`.
pub fn equivalence_gap(
    f: &ImageGrid,
    z: &ImageGrid,
    spec: &NoiseSpec,
    phi: &Penalty,
    m: usize,
    seed: u64,
) -> Result<EquivalenceGap> {
    let sigma = sigma_map_for(spec, f.height(), f.width())?;
    equivalence_gap_with(f, z, spec, phi, &sigma, m, seed)
}

/// Gap against the blurred penalty with an explicit deviation map.
pub fn equivalence_gap_with(
    f: &ImageGrid,
    z: &ImageGrid,
    spec: &NoiseSpec,
    phi: &Penalty,
    sigma: &SigmaMap,
    m: usize,
    seed: u64,
) -> Result<EquivalenceGap> {
    let mc = mc_expected_loss(f, z, spec, phi, m, seed)?;
    gap_from_estimate(f, z, phi, sigma, mc)
}

/// Completes a gap computation from an already aggregated Monte-Carlo estimate.
pub fn gap_from_estimate(
    f: &ImageGrid,
    z: &ImageGrid,
    phi: &Penalty,
    sigma: &SigmaMap,
    mc: McEstimate,
) -> Result<EquivalenceGap> {
    f.ensure_same_shape(z)?;
    let plan = Fourier::new(f.height(), f.width());
    let bp = BlurredPenalty::new(*phi, sigma.clone())?;
    let blurred_loss = bp.loss(&plan.forward(f)?, &plan.forward(z)?)?;
    let diff = (mc.mean - blurred_loss).abs();
    let gap = if diff == 0.0 { 0.0 } else { diff / blurred_loss };
    Ok(EquivalenceGap { gap, mc, blurred_loss })
}

/// Points in the argmin scan.
pub const ARGMIN_GRID: usize = 201;

/// Scans `[-10 sigma, 10 sigma]` on 201 points and checks the blurred penalty
/// strictly decreases up to `t = 0` and strictly increases after it.
pub fn argmin_check(bp: &BlurredPenalty, sigma: f64) -> Result<bool> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", "argmin scan needs sigma > 0"));
    }
    let half = ARGMIN_GRID / 2;
    let values: Vec<f64> = (0..ARGMIN_GRID)
        .map(|i| bp.eval(sigma * 10.0 * (i as f64 - half as f64) / half as f64, sigma))
        .collect();
    let decreasing = values[..=half].windows(2).all(|p| p[1] < p[0]);
    let increasing = values[half..].windows(2).all(|p| p[1] > p[0]);
    Ok(decreasing && increasing)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub phi: f64,
    pub blurred: f64,
    pub derivative: f64,
}

/// `phi`, its blur and the blur's derivative on `points` evenly spaced values of `[lo, hi]`.
pub fn penalty_curve(bp: &BlurredPenalty, sigma: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<CurvePoint>> {
    if points < 2 || !(hi > lo) {
        return Err(invalid("curve", "need at least 2 points on a non-empty interval"));
    }
    let phi = bp.base();
    (0..points)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            Ok(CurvePoint {
                t,
                phi: phi.eval(t),
                blurred: bp.eval(t, sigma),
                derivative: bp.derivative(t, sigma)?,
            })
        })
        .collect()
}
