//! Monte-Carlo statistics of noise spectra: per-coefficient samples, Gaussianity
//! and independence checks, and empirical and closed-form variance maps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::fourier::{dft_forward, kernel_transform, Fourier};
use crate::grid::{conjugate_bin, is_self_conjugate, ImageGrid, Spectrum};
use crate::noise::{sample_noise, NoiseSpec, RngSeed, StripeAxis};

/// Realizations per reduction chunk. Empirical maps are merged chunk by chunk
/// in index order, so any parallel split along chunk boundaries reproduces the
/// sequential result bit for bit.
pub const MC_CHUNK: u64 = 256;

/// Real (`a`) or imaginary (`b`) part of a Fourier coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Real,
    Imag,
}

impl Component {
    pub fn label(self) -> &'static str {
        match self {
            Component::Real => "a",
            Component::Imag => "b",
        }
    }
}

/// Seed of Monte-Carlo realization `index`.
#[inline]
pub fn realization_seed(seed: u64, index: u64) -> RngSeed {
    RngSeed::new(seed, index)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSampleSet {
    pub bin: (usize, usize),
    /// Grid shape the samples were drawn on.
    pub shape: (usize, usize),
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CoeffSampleSet {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::Real => &self.a,
            Component::Imag => &self.b,
        }
    }
}

fn check_bins(bins: &[(usize, usize)], height: usize, width: usize) -> Result<()> {
    for &(k, l) in bins {
        if k >= height || l >= width {
            return Err(Error::InvalidBin { k, l, height, width });
        }
    }
    Ok(())
}

/// Coefficient samples at `bins` for realizations `range` (stream id = realization index).
pub fn coeff_samples_range(
    spec: &NoiseSpec,
    height: usize,
    width: usize,
    bins: &[(usize, usize)],
    range: Range<u64>,
    seed: u64,
) -> Result<Vec<CoeffSampleSet>> {
    check_bins(bins, height, width)?;
    spec.validate(height, width)?;
    let fourier = Fourier::new(height, width);
    let count = (range.end - range.start) as usize;
    let mut sets: Vec<CoeffSampleSet> = bins
        .iter()
        .map(|&bin| CoeffSampleSet {
            bin,
            shape: (height, width),
            a: Vec::with_capacity(count),
            b: Vec::with_capacity(count),
        })
        .collect();
    for i in range {
        let n = sample_noise(spec, height, width, realization_seed(seed, i))?;
        let f = fourier.forward(&n)?;
        for set in sets.iter_mut() {
            let c = f.get(set.bin.0, set.bin.1);
            set.a.push(c.re);
            set.b.push(c.im);
        }
    }
    Ok(sets)
}

/// `m` independent realizations, each transformed once, sampled at `bins`.
pub fn monte_carlo_coeffs(
    spec: &NoiseSpec,
    height: usize,
    width: usize,
    bins: &[(usize, usize)],
    m: usize,
    seed: u64,
) -> Result<Vec<CoeffSampleSet>> {
    if m < 100 {
        return Err(invalid("M", format!("need at least 100 realizations, got {m}")));
    }
    coeff_samples_range(spec, height, width, bins, 0..m as u64, seed)
}

/// Pass thresholds on skewness, excess kurtosis and `sqrt(M) * KS`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianityThresholds {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_scale: f64,
}

impl Default for GaussianityThresholds {
    fn default() -> Self {
        Self {
            skewness: 0.1,
            excess_kurtosis: 0.2,
            ks_scale: 1.6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianityReport {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
    /// Variance below `1e-30`: the coefficient is identically zero.
    pub degenerate: bool,
    pub pass: bool,
}

const DEGENERATE_VARIANCE: f64 = 1e-30;

pub fn gaussianity_test(set: &CoeffSampleSet, component: Component) -> Result<GaussianityReport> {
    gaussianity_of(set.component(component), &GaussianityThresholds::default())
}

/// Moments from k-statistics and the KS distance to `N(mean, variance)`.
pub fn gaussianity_of(samples: &[f64], thresholds: &GaussianityThresholds) -> Result<GaussianityReport> {
    let m = samples.len();
    if m < 4 {
        return Err(invalid("samples", format!("need at least 4 samples, got {m}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(invalid("samples", "non-finite sample"));
    }
    let n = m as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let variance = m2 * n / (n - 1.0);
    if variance < DEGENERATE_VARIANCE {
        return Ok(GaussianityReport {
            samples: m,
            mean,
            variance,
            skewness: 0.0,
            excess_kurtosis: 0.0,
            ks_statistic: 0.0,
            degenerate: true,
            pass: true,
        });
    }
    let skewness = libm::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / libm::pow(m2, 1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let excess_kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = libm::sqrt(variance);
    let mut ks: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf((x - mean) / sd);
        ks = ks.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    let pass = skewness.abs() <= thresholds.skewness
        && excess_kurtosis.abs() <= thresholds.excess_kurtosis
        && ks <= thresholds.ks_scale / libm::sqrt(n);
    Ok(GaussianityReport {
        samples: m,
        mean,
        variance,
        skewness,
        excess_kurtosis,
        ks_statistic: ks,
        degenerate: false,
        pass,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndependenceReport {
    pub correlation: f64,
    pub threshold: f64,
    /// One of the two sample sets is constant, so the correlation is reported as 0.
    pub degenerate: bool,
    pub pass: bool,
}

/// Pearson correlation between two paired coefficient components; passes when `|corr| < 4/sqrt(M)`.
pub fn independence_test(
    s1: &CoeffSampleSet,
    s2: &CoeffSampleSet,
    components: (Component, Component),
) -> Result<IndependenceReport> {
    if s1.shape != s2.shape {
        return Err(Error::DimensionMismatch {
            expected: s1.shape,
            got: s2.shape,
        });
    }
    if s1.len() != s2.len() {
        return Err(Error::UnpairedSamples {
            left: s1.len(),
            right: s2.len(),
        });
    }
    let (h, w) = s1.shape;
    let (k1, l1) = s1.bin;
    let (k2, l2) = s2.bin;
    if s1.bin != s2.bin && conjugate_bin(k1, l1, h, w) == s2.bin {
        return Err(Error::ConjugatePairRejected { k1, l1, k2, l2 });
    }
    let x = s1.component(components.0);
    let y = s2.component(components.1);
    let n = x.len();
    if n < 2 {
        return Err(invalid("samples", "need at least 2 paired samples"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let threshold = 4.0 / libm::sqrt(n as f64);
    let degenerate = sxx <= DEGENERATE_VARIANCE * n as f64 || syy <= DEGENERATE_VARIANCE * n as f64;
    let correlation = if degenerate { 0.0 } else { sxy / libm::sqrt(sxx * syy) };
    Ok(IndependenceReport {
        correlation,
        threshold,
        degenerate,
        pass: correlation.abs() < threshold,
    })
}

/// Per-bin variance of a noise spectrum.
///
/// Both components are kept. [`VarianceMap::get`] reports the variance per
/// real degree of freedom: the mean of `var a` and `var b` on ordinary bins and
/// `var a` on self-conjugate bins, where `b` vanishes identically. For i.i.d.
/// noise this is `sigma^2 / (2UV)` on ordinary bins and twice that on
/// self-conjugate ones.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceMap {
    height: usize,
    width: usize,
    var_a: Vec<f64>,
    var_b: Vec<f64>,
}

impl VarianceMap {
    pub fn from_components(height: usize, width: usize, var_a: Vec<f64>, var_b: Vec<f64>) -> Result<Self> {
        if var_a.len() != height * width || var_b.len() != height * width {
            return Err(invalid("variance map", "component length differs from U*V"));
        }
        if var_a.iter().chain(&var_b).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("variance map", "entries must be finite and non-negative"));
        }
        Ok(Self {
            height,
            width,
            var_a,
            var_b,
        })
    }

    /// Map whose per-degree-of-freedom value is `values[k,l]` (split evenly over `a` and `b`
    /// on ordinary bins, all in `a` on self-conjugate bins).
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(invalid("variance map", "length differs from U*V"));
        }
        let mut b = values.clone();
        for k in 0..height {
            for l in 0..width {
                if is_self_conjugate(k, l, height, width) {
                    b[k * width + l] = 0.0;
                }
            }
        }
        Self::from_components(height, width, values, b)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            var_a: vec![0.0; height * width],
            var_b: vec![0.0; height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        let i = k * self.width + l;
        if is_self_conjugate(k, l, self.height, self.width) {
            self.var_a[i]
        } else {
            0.5 * (self.var_a[i] + self.var_b[i])
        }
    }

    /// `(var a, var b)` at a bin.
    pub fn components(&self, k: usize, l: usize) -> (f64, f64) {
        let i = k * self.width + l;
        (self.var_a[i], self.var_b[i])
    }

    /// Row-major [`VarianceMap::get`] values.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.height * self.width);
        for k in 0..self.height {
            for l in 0..self.width {
                out.push(self.get(k, l));
            }
        }
        out
    }

    /// Expected coefficient energy `var a + var b` summed over the spectrum.
    pub fn total_energy(&self) -> f64 {
        self.var_a.iter().sum::<f64>() + self.var_b.iter().sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    fn add_assign(&mut self, other: &VarianceMap) {
        for (x, y) in self.var_a.iter_mut().zip(&other.var_a) {
            *x += y;
        }
        for (x, y) in self.var_b.iter_mut().zip(&other.var_b) {
            *x += y;
        }
    }

    fn scale_by(&mut self, gain: impl Fn(usize, usize) -> f64) {
        for k in 0..self.height {
            for l in 0..self.width {
                let g = gain(k, l);
                self.var_a[k * self.width + l] *= g;
                self.var_b[k * self.width + l] *= g;
            }
        }
    }
}

/// Running per-bin mean and squared deviation of `a` and `b` (Welford, Chan merge).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumMoments {
    height: usize,
    width: usize,
    count: u64,
    mean_a: Vec<f64>,
    m2_a: Vec<f64>,
    mean_b: Vec<f64>,
    m2_b: Vec<f64>,
}

impl SpectrumMoments {
    pub fn new(height: usize, width: usize) -> Self {
        let z = vec![0.0; height * width];
        Self {
            height,
            width,
            count: 0,
            mean_a: z.clone(),
            m2_a: z.clone(),
            mean_b: z.clone(),
            m2_b: z,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, f: &Spectrum) -> Result<()> {
        if f.shape() != (self.height, self.width) {
            return Err(Error::DimensionMismatch {
                expected: (self.height, self.width),
                got: f.shape(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, c) in f.data().iter().enumerate() {
            let d = c.re - self.mean_a[i];
            self.mean_a[i] += d / n;
            self.m2_a[i] += d * (c.re - self.mean_a[i]);
            let d = c.im - self.mean_b[i];
            self.mean_b[i] += d / n;
            self.m2_b[i] += d * (c.im - self.mean_b[i]);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SpectrumMoments) -> Result<()> {
        if other.shape() != self.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let merge = |mean: &mut [f64], m2: &mut [f64], omean: &[f64], om2: &[f64]| {
            for i in 0..mean.len() {
                let d = omean[i] - mean[i];
                mean[i] += d * nb / n;
                m2[i] += om2[i] + d * d * na * nb / n;
            }
        };
        merge(&mut self.mean_a, &mut self.m2_a, &other.mean_a, &other.m2_a);
        merge(&mut self.mean_b, &mut self.m2_b, &other.mean_b, &other.m2_b);
        self.count += other.count;
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Unbiased per-bin variances.
    pub fn variance_map(&self) -> Result<VarianceMap> {
        if self.count < 2 {
            return Err(invalid("M", "need at least 2 realizations for a variance"));
        }
        let d = (self.count - 1) as f64;
        VarianceMap::from_components(
            self.height,
            self.width,
            self.m2_a.iter().map(|v| v / d).collect(),
            self.m2_b.iter().map(|v| v / d).collect(),
        )
    }
}

/// Moments over realizations `range`.
pub fn accumulate_realizations(
    spec: &NoiseSpec,
    height: usize,
    width: usize,
    range: Range<u64>,
    seed: u64,
) -> Result<SpectrumMoments> {
    spec.validate(height, width)?;
    let fourier = Fourier::new(height, width);
    let mut acc = SpectrumMoments::new(height, width);
    for i in range {
        let n = sample_noise(spec, height, width, realization_seed(seed, i))?;
        acc.push(&fourier.forward(&n)?)?;
    }
    Ok(acc)
}

/// The realization ranges that make up an `m`-draw run.
pub fn mc_chunks(m: u64) -> impl Iterator<Item = Range<u64>> {
    (0..m.div_ceil(MC_CHUNK)).map(move |c| c * MC_CHUNK..((c + 1) * MC_CHUNK).min(m))
}

pub fn variance_map_empirical(spec: &NoiseSpec, height: usize, width: usize, m: usize, seed: u64) -> Result<VarianceMap> {
    if m < 2 {
        return Err(invalid("M", format!("need at least 2 realizations, got {m}")));
    }
    let mut total = SpectrumMoments::new(height, width);
    for range in mc_chunks(m as u64) {
        total.merge(&accumulate_realizations(spec, height, width, range, seed)?)?;
    }
    total.variance_map()
}

/// `|F^(h)|^2 * sigma^2 / (2UV)` for `h (*) eta` with i.i.d. `eta` of variance `sigma^2`.
pub fn variance_map_theoretical(h: &ImageGrid, inner_variance: f64, height: usize, width: usize) -> Result<VarianceMap> {
    h.ensure_shape((height, width))?;
    if !(inner_variance.is_finite() && inner_variance >= 0.0) {
        return Err(invalid("inner_variance", "must be finite and non-negative"));
    }
    let mut map = iid_map(inner_variance, height, width);
    let hf = kernel_transform(h);
    map.scale_by(|k, l| hf.get(k, l).norm_sqr());
    Ok(map)
}

fn iid_map(variance: f64, height: usize, width: usize) -> VarianceMap {
    let v = variance / (2 * height * width) as f64;
    VarianceMap::from_values(height, width, vec![v; height * width])
        .expect("i.i.d. map is well formed")
        .doubled_on_self_conjugate()
}

impl VarianceMap {
    fn doubled_on_self_conjugate(mut self) -> Self {
        for k in 0..self.height {
            for l in 0..self.width {
                if is_self_conjugate(k, l, self.height, self.width) {
                    self.var_a[k * self.width + l] *= 2.0;
                }
            }
        }
        self
    }
}

/// Closed-form variance map of any noise family.
pub fn theoretical_variance_map(spec: &NoiseSpec, height: usize, width: usize) -> Result<VarianceMap> {
    spec.validate(height, width)?;
    Ok(theoretical(spec, height, width))
}

fn theoretical(spec: &NoiseSpec, height: usize, width: usize) -> VarianceMap {
    match spec {
        NoiseSpec::IidGaussian { .. } | NoiseSpec::IidUniform { .. } | NoiseSpec::IidLaplace { .. } => {
            iid_map(spec.iid_variance().expect("i.i.d."), height, width)
        }
        NoiseSpec::PoissonCentered { peak, reference } => {
            independent_map(&reference.map(|z| z / peak))
        }
        NoiseSpec::HetGaussian { alpha, beta, reference } => {
            independent_map(&reference.map(|z| alpha * z + beta))
        }
        NoiseSpec::Stationary { kernel, inner } => {
            let mut map = theoretical(inner, height, width);
            let hf = kernel_transform(kernel);
            map.scale_by(|k, l| hf.get(k, l).norm_sqr());
            map
        }
        NoiseSpec::Stripe { sigma, axis } => {
            // Constant along one axis: a 1-D i.i.d. spectrum on the k = 0 row (or l = 0 column).
            let mut map = VarianceMap::zeros(height, width);
            let (len, var) = match axis {
                StripeAxis::Column => (width, sigma * sigma / (2 * width) as f64),
                StripeAxis::Row => (height, sigma * sigma / (2 * height) as f64),
            };
            for j in 0..len {
                let (k, l) = match axis {
                    StripeAxis::Column => (0, j),
                    StripeAxis::Row => (j, 0),
                };
                let i = k * width + l;
                if is_self_conjugate(k, l, height, width) {
                    map.var_a[i] = 2.0 * var;
                } else {
                    map.var_a[i] = var;
                    map.var_b[i] = var;
                }
            }
            map
        }
        NoiseSpec::Periodic { components } => {
            // A cos(theta + Phi) puts (A/2) e^{jPhi} on the bin and its conjugate;
            // on a self-conjugate bin the coefficient is A cos(Phi).
            let mut map = VarianceMap::zeros(height, width);
            for c in components {
                let s2 = c.amplitude * c.amplitude;
                let (k, l) = (c.k0, c.l0);
                if is_self_conjugate(k, l, height, width) {
                    map.var_a[k * width + l] += s2 / 2.0;
                } else {
                    let (ck, cl) = conjugate_bin(k, l, height, width);
                    for i in [k * width + l, ck * width + cl] {
                        map.var_a[i] += s2 / 8.0;
                        map.var_b[i] += s2 / 8.0;
                    }
                }
            }
            map
        }
        NoiseSpec::Mixture(parts) => {
            let mut map = VarianceMap::zeros(height, width);
            for p in parts {
                map.add_assign(&theoretical(p, height, width));
            }
            map
        }
    }
}

/// Independent zero-mean pixels with variance field `s`:
/// `var a = (mean s + Re S[2k,2l]) / (2UV)`, `var b = (mean s - Re S[2k,2l]) / (2UV)`
/// where `S = dft_forward(s)`.
fn independent_map(s: &ImageGrid) -> VarianceMap {
    let (height, width) = s.shape();
    let uv = (height * width) as f64;
    let sf = dft_forward(s);
    let s00 = sf.re(0, 0);
    let mut map = VarianceMap::zeros(height, width);
    for k in 0..height {
        for l in 0..width {
            let r = sf.re((2 * k) % height, (2 * l) % width);
            let i = k * width + l;
            map.var_a[i] = ((s00 + r) / (2.0 * uv)).max(0.0);
            map.var_b[i] = if is_self_conjugate(k, l, height, width) {
                0.0
            } else {
                ((s00 - r) / (2.0 * uv)).max(0.0)
            };
        }
    }
    map
}

/// Smallest number of bins whose [`VarianceMap::get`] values reach a fraction `p` of the total.
pub fn sparsity_index(map: &VarianceMap, p: f64) -> Result<usize> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("mass fraction must lie in (0, 1), got {p}")));
    }
    let mut values = map.values();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Ok(0);
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let target = p * total;
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if acc >= target {
            return Ok(i + 1);
        }
    }
    Ok(values.len())
}

/// Fraction of the map total lying on frequency row `k`.
pub fn row_mass_fraction(map: &VarianceMap, k: usize) -> f64 {
    let (_, w) = map.shape();
    let total = map.total();
    if total <= 0.0 {
        return 0.0;
    }
    (0..w).map(|l| map.get(k, l)).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::box_kernel;

    #[test]
    fn gaussian_coefficient_variance_law() {
        let spec = NoiseSpec::gaussian(1.0);
        let sets = monte_carlo_coeffs(&spec, 16, 16, &[(5, 7), (0, 0)], 4000, 3).unwrap();
        let m = sets[0].len() as f64;
        let mean = sets[0].a.iter().sum::<f64>() / m;
        let var = sets[0].a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        assert!((var / (1.0 / 512.0) - 1.0).abs() < 0.1);
        assert!(sets[1].b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn too_few_realizations_and_bad_bins_are_rejected() {
        let spec = NoiseSpec::gaussian(1.0);
        assert!(monte_carlo_coeffs(&spec, 8, 8, &[(1, 1)], 50, 0).is_err());
        assert!(matches!(
            monte_carlo_coeffs(&spec, 8, 8, &[(8, 1)], 100, 0),
            Err(Error::InvalidBin { .. })
        ));
    }

    #[test]
    fn k_statistics_of_a_known_sample() {
        // Oracle values from the textbook k-statistic formulas.
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        let r = gaussianity_of(&x, &GaussianityThresholds::default()).unwrap();
        assert!((r.mean - 4.0).abs() < 1e-15);
        assert!((r.variance - 12.5).abs() < 1e-12);
        // m2 = 10, m3 = 36, m4 = 278.8
        let g1 = 36.0 / libm::pow(10.0, 1.5);
        let skew = libm::sqrt(20.0) / 3.0 * g1;
        assert!((r.skewness - skew).abs() < 1e-12);
        let g2 = 278.8 / 100.0 - 3.0;
        let kurt = (6.0 * g2 + 6.0) * 4.0 / 6.0;
        assert!((r.excess_kurtosis - kurt).abs() < 1e-12);
    }

    #[test]
    fn constant_samples_are_degenerate_passes() {
        let r = gaussianity_of(&[0.0; 200], &GaussianityThresholds::default()).unwrap();
        assert!(r.degenerate && r.pass);
    }

    #[test]
    fn conjugate_pairs_are_rejected() {
        let spec = NoiseSpec::gaussian(1.0);
        let sets = monte_carlo_coeffs(&spec, 8, 8, &[(0, 1), (0, 7)], 100, 0).unwrap();
        assert!(matches!(
            independence_test(&sets[0], &sets[1], (Component::Real, Component::Real)),
            Err(Error::ConjugatePairRejected { .. })
        ));
    }

    #[test]
    fn chunked_merge_equals_single_pass_variance() {
        let spec = NoiseSpec::IidUniform { halfwidth: 1.0 };
        let mut merged = SpectrumMoments::new(4, 4);
        for r in [0..7u64, 7..20, 20..21, 21..40] {
            merged.merge(&accumulate_realizations(&spec, 4, 4, r, 9).unwrap()).unwrap();
        }
        let single = accumulate_realizations(&spec, 4, 4, 0..40, 9).unwrap();
        let (a, b) = (merged.variance_map().unwrap(), single.variance_map().unwrap());
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn identity_kernel_map_is_flat_with_doubled_special_bins() {
        let map = variance_map_theoretical(&ImageGrid::impulse(8, 8), 2.0, 8, 8).unwrap();
        for k in 0..8 {
            for l in 0..8 {
                let expect = if is_self_conjugate(k, l, 8, 8) { 2.0 / 64.0 } else { 1.0 / 64.0 };
                assert!((map.get(k, l) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stationary_theory_matches_family_theory() {
        let h = box_kernel(8, 8, 3);
        let spec = NoiseSpec::Stationary {
            kernel: h.clone(),
            inner: alloc::boxed::Box::new(NoiseSpec::gaussian(1.0)),
        };
        let a = theoretical_variance_map(&spec, 8, 8).unwrap();
        let b = variance_map_theoretical(&h, 1.0, 8, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sparsity_of_simple_maps() {
        let flat = VarianceMap::from_components(4, 4, vec![1.0; 16], vec![1.0; 16]).unwrap();
        assert_eq!(sparsity_index(&flat, 0.5).unwrap(), 8);
        let mut single = vec![0.0; 16];
        single[5] = 3.0;
        let m = VarianceMap::from_components(4, 4, single.clone(), single).unwrap();
        assert_eq!(sparsity_index(&m, 0.99).unwrap(), 1);
        assert!(sparsity_index(&m, 1.0).is_err());
    }
}
