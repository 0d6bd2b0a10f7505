//! PSNR and SSIM.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::grid::ImageGrid;

/// PSNR reported for (numerically) identical images.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: f64,
}

/// `10 log10(peak^2 / MSE)`, capped at 99 dB once `MSE < peak^2 10^-9.9`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if !(peak.is_finite() && peak > 0.0) {
        return Err(invalid("peak", "must be positive"));
    }
    let mse = a.sub(b)?.energy() / a.len() as f64;
    if mse < peak * peak * libm::pow(10.0, -PSNR_CAP / 10.0) {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * libm::log10(peak * peak / mse))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Mean local SSIM over every position where an 11x11 Gaussian window
/// (sigma 1.5) fits; the window shrinks to the largest odd size that fits on
/// smaller images.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, dynamic_range: f64) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if !(dynamic_range.is_finite() && dynamic_range > 0.0) {
        return Err(invalid("dynamic_range", "must be positive"));
    }
    let (h, w) = a.shape();
    let mut size = SSIM_WINDOW.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let r = (size / 2) as f64;
    let g1: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
        })
        .collect();
    let norm: f64 = g1.iter().sum::<f64>();
    let g1: Vec<f64> = g1.iter().map(|v| v / norm).collect();

    let c1 = (K1 * dynamic_range) * (K1 * dynamic_range);
    let c2 = (K2 * dynamic_range) * (K2 * dynamic_range);
    let mut total = 0.0;
    let mut count = 0usize;
    for u0 in 0..=h - size {
        for v0 in 0..=w - size {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let wt = g1[i] * g1[j];
                    let x = a.get(u0 + i, v0 + j);
                    let y = b.get(u0 + i, v0 + j);
                    ma += wt * x;
                    mb += wt * y;
                    saa += wt * x * x;
                    sbb += wt * y * y;
                    sab += wt * x * y;
                }
            }
            let va = (saa - ma * ma).max(0.0);
            let vb = (sbb - mb * mb).max(0.0);
            let cov = sab - ma * mb;
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn metrics(restored: &ImageGrid, reference: &ImageGrid, peak: f64) -> Result<MetricsReport> {
    Ok(MetricsReport {
        psnr: psnr(restored, reference, peak)?,
        ssim: ssim(restored, reference, peak)?,
    })
}
