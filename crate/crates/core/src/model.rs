//! Trainable restoration models: a per-frequency complex gain and a small
//! residual convolutional network with circular padding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::fourier::Fourier;
use crate::grid::{conjugate_bin, is_self_conjugate, ImageGrid, Spectrum};
use crate::noise::RngSeed;

/// A differentiable map from images to images with a flat parameter vector.
pub trait Model {
    /// Whatever the backward pass needs from the forward pass.
    type Cache;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn forward_cached(&self, x: &ImageGrid) -> Result<(ImageGrid, Self::Cache)>;

    /// Gradient of the loss with respect to every parameter, given `d loss / d output`.
    fn backward(&self, cache: &Self::Cache, upstream: &ImageGrid) -> Result<Vec<f64>>;

    fn forward(&self, x: &ImageGrid) -> Result<ImageGrid> {
        Ok(self.forward_cached(x)?.0)
    }

    /// Restores parameter constraints after an update.
    fn project(&mut self) {}

    /// Input shape the model is tied to, if any.
    fn fixed_shape(&self) -> Option<(usize, usize)> {
        None
    }

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

pub fn model_forward<M: Model>(model: &M, x: &ImageGrid) -> Result<ImageGrid> {
    model.forward(x)
}

pub fn model_backward<M: Model>(model: &M, x: &ImageGrid, upstream: &ImageGrid) -> Result<Vec<f64>> {
    let (_, cache) = model.forward_cached(x)?;
    model.backward(&cache, upstream)
}

/// `f = Re F^{-1}(W . F(x))` with Hermitian gains `W`.
///
/// Parameters are stored interleaved as `re, im` per bin in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDiagonalModel {
    height: usize,
    width: usize,
    gains: Vec<f64>,
    plan: Fourier,
}

impl SpectralDiagonalModel {
    /// All gains one (identity map).
    pub fn identity(height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |_, _| Complex64::new(1.0, 0.0))
    }

    pub fn from_fn(height: usize, width: usize, mut gain: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut gains = Vec::with_capacity(2 * height * width);
        for k in 0..height {
            for l in 0..width {
                let g = gain(k, l);
                gains.push(g.re);
                gains.push(g.im);
            }
        }
        let mut m = Self {
            height,
            width,
            gains,
            plan: Fourier::new(height, width),
        };
        m.project();
        m
    }

    pub fn from_params(height: usize, width: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != 2 * height * width {
            return Err(invalid(
                "params",
                format!("expected {} values, got {}", 2 * height * width, params.len()),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("params", "non-finite gain"));
        }
        let mut m = Self {
            height,
            width,
            gains: params,
            plan: Fourier::new(height, width),
        };
        m.project();
        Ok(m)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn gain(&self, k: usize, l: usize) -> Complex64 {
        let i = 2 * (k * self.width + l);
        Complex64::new(self.gains[i], self.gains[i + 1])
    }

    pub fn gains(&self) -> Spectrum {
        let data = self.gains.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Spectrum::new(self.height, self.width, data).expect("gain storage matches shape")
    }
}

impl Model for SpectralDiagonalModel {
    type Cache = Spectrum;

    fn params(&self) -> &[f64] {
        &self.gains
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.gains
    }

    fn forward_cached(&self, x: &ImageGrid) -> Result<(ImageGrid, Spectrum)> {
        let fx = self.plan.forward(x)?;
        let mut out = fx.clone();
        for (i, c) in out.data_mut().iter_mut().enumerate() {
            *c *= Complex64::new(self.gains[2 * i], self.gains[2 * i + 1]);
        }
        Ok((self.plan.inverse_real(&out)?, fx))
    }

    /// `dL/dW = UV . conj(F(x)) . F(upstream)`, split into real and imaginary parts.
    fn backward(&self, fx: &Spectrum, upstream: &ImageGrid) -> Result<Vec<f64>> {
        let g = self.plan.forward(upstream)?;
        let uv = (self.height * self.width) as f64;
        let mut out = Vec::with_capacity(self.gains.len());
        for (x, gg) in fx.data().iter().zip(g.data()) {
            let c = x.conj() * gg * uv;
            out.push(c.re);
            out.push(c.im);
        }
        Ok(out)
    }

    /// Averages each gain with the conjugate of its mirror bin.
    fn project(&mut self) {
        let (h, w) = (self.height, self.width);
        for k in 0..h {
            for l in 0..w {
                let i = 2 * (k * w + l);
                if is_self_conjugate(k, l, h, w) {
                    self.gains[i + 1] = 0.0;
                    continue;
                }
                let (ck, cl) = conjugate_bin(k, l, h, w);
                let j = 2 * (ck * w + cl);
                if j < i {
                    continue;
                }
                let re = 0.5 * (self.gains[i] + self.gains[j]);
                let im = 0.5 * (self.gains[i + 1] - self.gains[j + 1]);
                self.gains[i] = re;
                self.gains[j] = re;
                self.gains[i + 1] = im;
                self.gains[j + 1] = -im;
            }
        }
    }

    fn fixed_shape(&self) -> Option<(usize, usize)> {
        Some((self.height, self.width))
    }
}

/// Shape of one convolution layer (square odd kernel).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvLayer {
    pub const fn new(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kernel,
            in_channels,
            out_channels,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }
}

/// `f(x) = x + net(x)`, `net` a stack of circular convolutions with rectifiers between them.
///
/// Parameters are laid out layer by layer: weights `[out][in][du][dv]`, then biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNetModel {
    layers: Vec<ConvLayer>,
    params: Vec<f64>,
}

/// Activations kept by [`ConvNetModel::forward_cached`].
#[derive(Clone, Debug)]
pub struct ConvCache {
    height: usize,
    width: usize,
    /// Circularly padded input of every layer.
    padded: Vec<Vec<Vec<f64>>>,
    /// Post-rectifier output of every hidden layer.
    hidden: Vec<Vec<Vec<f64>>>,
}

impl ConvNetModel {
    /// The default desk-scale stack: three 3x3 layers with 8 hidden channels.
    pub fn default_layers() -> Vec<ConvLayer> {
        vec![ConvLayer::new(3, 1, 8), ConvLayer::new(3, 8, 8), ConvLayer::new(3, 8, 1)]
    }

    pub fn zeros(layers: &[ConvLayer]) -> Result<Self> {
        validate_layers(layers)?;
        let n = layers.iter().map(ConvLayer::param_count).sum();
        Ok(Self {
            layers: layers.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// He-normal weights and zero biases. With `zero_last` the final layer starts
    /// at zero so the network begins as the identity map.
    pub fn init(layers: &[ConvLayer], seed: RngSeed, zero_last: bool) -> Result<Self> {
        let mut m = Self::zeros(layers)?;
        let mut rng = seed.rng();
        let mut offset = 0;
        for (i, layer) in layers.iter().enumerate() {
            let fan_in = (layer.in_channels * layer.kernel * layer.kernel) as f64;
            let normal = Normal::new(0.0, libm::sqrt(2.0 / fan_in)).expect("positive scale");
            let last = i + 1 == layers.len();
            for p in &mut m.params[offset..offset + layer.weight_count()] {
                let v = normal.sample(&mut rng);
                *p = if last && zero_last { 0.0 } else { v };
            }
            offset += layer.param_count();
        }
        Ok(m)
    }

    pub fn from_params(layers: &[ConvLayer], params: Vec<f64>) -> Result<Self> {
        validate_layers(layers)?;
        let n: usize = layers.iter().map(ConvLayer::param_count).sum();
        if params.len() != n {
            return Err(invalid("params", format!("expected {n} values, got {}", params.len())));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("params", "non-finite weight"));
        }
        Ok(Self {
            layers: layers.to_vec(),
            params,
        })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    /// Number of pixels on each side that influence one output pixel.
    pub fn receptive_field(&self) -> usize {
        1 + self.layers.iter().map(|l| l.kernel - 1).sum::<usize>()
    }

    fn layer_params(&self, i: usize) -> (&[f64], &[f64]) {
        let start: usize = self.layers[..i].iter().map(ConvLayer::param_count).sum();
        let layer = self.layers[i];
        let w = &self.params[start..start + layer.weight_count()];
        let b = &self.params[start + layer.weight_count()..start + layer.param_count()];
        (w, b)
    }
}

fn validate_layers(layers: &[ConvLayer]) -> Result<()> {
    if layers.is_empty() {
        return Err(invalid("layers", "need at least one layer"));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.kernel % 2 == 0 || l.in_channels == 0 || l.out_channels == 0 {
            return Err(invalid(
                "layers",
                format!("layer {i}: kernel must be odd and channel counts positive"),
            ));
        }
    }
    if layers[0].in_channels != 1 || layers[layers.len() - 1].out_channels != 1 {
        return Err(invalid("layers", "network must map one channel to one channel"));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].out_channels != pair[1].in_channels {
            return Err(invalid("layers", format!("channel mismatch after layer {i}")));
        }
    }
    Ok(())
}

/// Circular padding by `r` on every side.
fn pad(src: &[f64], height: usize, width: usize, r: usize) -> Vec<f64> {
    let pw = width + 2 * r;
    let ph = height + 2 * r;
    let mut out = vec![0.0; ph * pw];
    for p in 0..ph {
        let u = (p + height * (r / height + 1) - r) % height;
        let row = &src[u * width..(u + 1) * width];
        let dst = &mut out[p * pw..(p + 1) * pw];
        for (q, d) in dst.iter_mut().enumerate() {
            *d = row[(q + width * (r / width + 1) - r) % width];
        }
    }
    out
}

/// Adjoint of [`pad`]: sums every padded cell back onto its source pixel.
fn fold(padded: &[f64], height: usize, width: usize, r: usize, out: &mut [f64]) {
    let pw = width + 2 * r;
    let ph = height + 2 * r;
    for p in 0..ph {
        let u = (p + height * (r / height + 1) - r) % height;
        let row = &padded[p * pw..(p + 1) * pw];
        let dst = &mut out[u * width..(u + 1) * width];
        for (q, &g) in row.iter().enumerate() {
            dst[(q + width * (r / width + 1) - r) % width] += g;
        }
    }
}

impl Model for ConvNetModel {
    type Cache = ConvCache;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward_cached(&self, x: &ImageGrid) -> Result<(ImageGrid, ConvCache)> {
        let (h, wd) = x.shape();
        let mut act: Vec<Vec<f64>> = vec![x.data().to_vec()];
        let mut padded_all = Vec::with_capacity(self.layers.len());
        let mut hidden = Vec::with_capacity(self.layers.len().saturating_sub(1));
        for (i, layer) in self.layers.iter().enumerate() {
            let k = layer.kernel;
            let r = k / 2;
            let pw = wd + 2 * r;
            let padded: Vec<Vec<f64>> = act.iter().map(|a| pad(a, h, wd, r)).collect();
            let (w, b) = self.layer_params(i);
            let mut out = Vec::with_capacity(layer.out_channels);
            for co in 0..layer.out_channels {
                let mut o = vec![b[co]; h * wd];
                for (ci, src) in padded.iter().enumerate() {
                    let wk = &w[(co * layer.in_channels + ci) * k * k..][..k * k];
                    for du in 0..k {
                        for dv in 0..k {
                            let wt = wk[du * k + dv];
                            if wt == 0.0 {
                                continue;
                            }
                            for u in 0..h {
                                let s = &src[(u + du) * pw + dv..][..wd];
                                let d = &mut o[u * wd..(u + 1) * wd];
                                for (dd, ss) in d.iter_mut().zip(s) {
                                    *dd += wt * ss;
                                }
                            }
                        }
                    }
                }
                out.push(o);
            }
            padded_all.push(padded);
            if i + 1 < self.layers.len() {
                for o in out.iter_mut() {
                    for v in o.iter_mut() {
                        *v = v.max(0.0);
                    }
                }
                hidden.push(out.clone());
            }
            act = out;
        }
        let mut y = x.clone();
        for (d, r) in y.data_mut().iter_mut().zip(&act[0]) {
            *d += r;
        }
        if !y.all_finite() {
            return Err(invalid("output", "network produced a non-finite value"));
        }
        Ok((
            y,
            ConvCache {
                height: h,
                width: wd,
                padded: padded_all,
                hidden,
            },
        ))
    }

    fn backward(&self, cache: &ConvCache, upstream: &ImageGrid) -> Result<Vec<f64>> {
        let (h, wd) = (cache.height, cache.width);
        upstream.ensure_shape((h, wd))?;
        let mut grads = vec![0.0; self.params.len()];
        let mut dz: Vec<Vec<f64>> = vec![upstream.data().to_vec()];
        let mut offset = self.params.len();
        for i in (0..self.layers.len()).rev() {
            let layer = self.layers[i];
            let k = layer.kernel;
            let r = k / 2;
            let pw = wd + 2 * r;
            offset -= layer.param_count();
            let (w, _) = self.layer_params(i);
            let padded = &cache.padded[i];
            let (gw, gb) = grads[offset..offset + layer.param_count()].split_at_mut(layer.weight_count());
            let need_input_grad = i > 0;
            let mut dpad = if need_input_grad {
                vec![vec![0.0; (h + 2 * r) * pw]; layer.in_channels]
            } else {
                Vec::new()
            };
            for co in 0..layer.out_channels {
                let g = &dz[co];
                gb[co] = g.iter().sum();
                for ci in 0..layer.in_channels {
                    let src = &padded[ci];
                    let base = (co * layer.in_channels + ci) * k * k;
                    for du in 0..k {
                        for dv in 0..k {
                            let mut acc = 0.0;
                            for u in 0..h {
                                let s = &src[(u + du) * pw + dv..][..wd];
                                let gg = &g[u * wd..(u + 1) * wd];
                                acc += s.iter().zip(gg).map(|(a, b)| a * b).sum::<f64>();
                            }
                            gw[base + du * k + dv] = acc;
                            if need_input_grad {
                                let wt = w[base + du * k + dv];
                                if wt == 0.0 {
                                    continue;
                                }
                                let dp = &mut dpad[ci];
                                for u in 0..h {
                                    let d = &mut dp[(u + du) * pw + dv..][..wd];
                                    let gg = &g[u * wd..(u + 1) * wd];
                                    for (dd, gv) in d.iter_mut().zip(gg) {
                                        *dd += wt * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if need_input_grad {
                let act = &cache.hidden[i - 1];
                let mut next = Vec::with_capacity(layer.in_channels);
                for (ci, dp) in dpad.iter().enumerate() {
                    let mut da = vec![0.0; h * wd];
                    fold(dp, h, wd, r, &mut da);
                    for (d, a) in da.iter_mut().zip(&act[ci]) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    next.push(da);
                }
                dz = next;
            }
        }
        Ok(grads)
    }
}

/// Mean squared error of a model over `(input, reference)` pairs.
pub fn model_mse<M: Model>(model: &M, pairs: &[(ImageGrid, ImageGrid)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, z) in pairs {
        let f = model.forward(x)?;
        let d = f.sub(z)?;
        total += d.energy();
        count += d.len();
    }
    Ok(total / count as f64)
}
