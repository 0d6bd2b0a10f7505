//! Optimizers, supervised training with clean or noisy targets, the Wiener
//! oracle for diagonal models, and unsupervised stripe removal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::ImageGrid;
use crate::loss::{LossEngine, LossSpec};
use crate::metrics::psnr;
use crate::model::{Model, SpectralDiagonalModel};
use crate::noise::RngSeed;
use crate::penalty::Penalty;
use crate::stats::VarianceMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lr();
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(invalid("lr", format!("learning rate must be finite and >= 0, got {lr}")));
        }
        if let Optimizer::Adam { beta1, beta2, eps, .. } = *self {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
                return Err(invalid("beta", "Adam betas must lie in [0, 1)"));
            }
            if !(eps > 0.0) {
                return Err(invalid("eps", "Adam eps must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

/// Optimizer together with its per-parameter state.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    optimizer: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: usize) -> Self {
        let (m, v) = match optimizer {
            Optimizer::Sgd { .. } => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; params], vec![0.0; params]),
        };
        Self { optimizer, m, v, t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        match self.optimizer {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - libm::pow(beta1, self.t as f64);
                let c2 = 1.0 - libm::pow(beta2, self.t as f64);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= lr * mh / (libm::sqrt(vh) + eps);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TargetMode {
    Clean,
    #[default]
    Noisy,
}

/// One training example: network input, its noisy target and, when known, the clean image.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: ImageGrid,
    pub noisy: ImageGrid,
    pub clean: Option<ImageGrid>,
}

impl Sample {
    fn target(&self, mode: TargetMode) -> Result<&ImageGrid> {
        match mode {
            TargetMode::Noisy => Ok(&self.noisy),
            TargetMode::Clean => self
                .clean
                .as_ref()
                .ok_or_else(|| invalid("target", "clean-target training needs clean images")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub optimizer: Optimizer,
    pub epochs: usize,
    /// Square random crops of this size; `None` trains on whole images.
    pub patch: Option<usize>,
    pub batch: usize,
    pub seed: u64,
    pub target: TargetMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.optimizer.validate()?;
        if self.batch == 0 {
            return Err(invalid("batch", "batch size must be positive"));
        }
        if self.patch == Some(0) {
            return Err(invalid("patch", "patch size must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch.
    pub loss: f64,
    /// Mean held-out PSNR (peak 1) after the epoch; NaN without a validation set.
    pub psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub curve: Vec<EpochRecord>,
}

const TRAIN_STREAM: u64 = 0x7472_6169_6e;
const USR_STREAM: u64 = 0x7573_72;

/// Mean PSNR of `model(x)` against `z` over `pairs`.
pub fn mean_psnr<M: Model>(model: &M, pairs: &[(ImageGrid, ImageGrid)], peak: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for (x, z) in pairs {
        total += psnr(&model.forward(x)?, z, peak)?;
    }
    Ok(total / pairs.len() as f64)
}

fn random_crop(rng: &mut ChaCha8Rng, img: &ImageGrid, size: usize) -> (usize, usize) {
    let (h, w) = img.shape();
    (rng.random_range(0..=h - size), rng.random_range(0..=w - size))
}

fn crop(img: &ImageGrid, at: (usize, usize), size: Option<usize>) -> ImageGrid {
    match size {
        Some(s) => img.crop_wrapped(at.0, at.1, s, s),
        None => img.clone(),
    }
}

fn check_finite(grads: &[f64], loss: f64, epoch: usize, step: usize) -> Result<()> {
    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::DivergenceDetected { epoch, step });
    }
    Ok(())
}

/// Mini-batch training on the practical objective `sum_s loss(model(x_s), target_s)`.
///
/// Each epoch visits every sample once in a seeded random order. Batch
/// gradients are averaged in batch order, so a run is a deterministic function
/// of `(model, data, config)`.
pub fn train<M: Model>(
    mut model: M,
    data: &[Sample],
    validation: &[(ImageGrid, ImageGrid)],
    config: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    config.validate()?;
    let first = data.first().ok_or(Error::EmptyDataset)?;
    let shape = first.input.shape();
    for s in data {
        s.input.ensure_shape(shape)?;
        s.target(config.target)?.ensure_shape(shape)?;
    }
    let work_shape = match config.patch {
        Some(p) if p > shape.0 || p > shape.1 => {
            return Err(invalid("patch", format!("patch {p} exceeds image {}x{}", shape.0, shape.1)));
        }
        Some(p) => (p, p),
        None => shape,
    };
    if let Some(fixed) = model.fixed_shape() {
        if fixed != work_shape {
            return Err(Error::DimensionMismatch {
                expected: fixed,
                got: work_shape,
            });
        }
    }
    let engine = LossEngine::new(config.loss, work_shape.0, work_shape.1)?;
    let mut opt = OptimizerState::new(config.optimizer, model.num_params());
    let mut rng = RngSeed::new(config.seed, TRAIN_STREAM).rng();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0usize;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sample_loss = vec![0.0; data.len()];
        for batch in order.chunks(config.batch) {
            let mut grad = vec![0.0; model.num_params()];
            for &i in batch {
                let s = &data[i];
                let target = s.target(config.target)?;
                let at = match config.patch {
                    Some(p) => random_crop(&mut rng, &s.input, p),
                    None => (0, 0),
                };
                let x = crop(&s.input, at, config.patch);
                let y = crop(target, at, config.patch);
                let (f, cache) = model.forward_cached(&x)?;
                let (value, upstream) = engine.value_and_grad(&f, &y)?;
                let g = model.backward(&cache, &upstream)?;
                check_finite(&g, value, epoch, step)?;
                sample_loss[i] = value;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grad.iter_mut() {
                *g *= inv;
            }
            opt.step(model.params_mut(), &grad);
            model.project();
            step += 1;
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::DivergenceDetected { epoch, step });
            }
        }
        let loss = sample_loss.iter().sum::<f64>() / data.len() as f64;
        curve.push(EpochRecord {
            epoch,
            loss,
            psnr: mean_psnr(&model, validation, 1.0)?,
        });
    }
    Ok(TrainOutcome { model, curve })
}

/// Closed-form optimal diagonal filter `S_z / (S_z + S_n)`; bins where both vanish pass through.
pub fn wiener_oracle(signal_psd: &VarianceMap, noise_psd: &VarianceMap) -> Result<SpectralDiagonalModel> {
    if signal_psd.shape() != noise_psd.shape() {
        return Err(Error::DimensionMismatch {
            expected: signal_psd.shape(),
            got: noise_psd.shape(),
        });
    }
    let (h, w) = signal_psd.shape();
    Ok(SpectralDiagonalModel::from_fn(h, w, |k, l| {
        let s = signal_psd.get(k, l);
        let n = noise_psd.get(k, l);
        let g = if s + n > 0.0 { s / (s + n) } else { 1.0 };
        num_complex::Complex64::new(g, 0.0)
    }))
}

/// Default noise amplification for the stripe swap.
pub const DEFAULT_EPSILON: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UsrConfig {
    /// Penalty of the `k = 0` Fourier loss.
    pub penalty: Penalty,
    pub optimizer: Optimizer,
    pub steps: usize,
    pub batch: usize,
    pub patch: Option<usize>,
    pub seed: u64,
    /// Curve resolution: one record per this many steps.
    pub log_every: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UsrRecord {
    pub step: usize,
    /// Mean loss over the steps since the previous record.
    pub loss: f64,
}

/// `x~_i = z^_i + eps (y_j - z^_j)` with `z^ = model(y)`, evaluated without gradients.
pub fn usr_swap<M: Model>(model: &M, y_i: &ImageGrid, y_j: &ImageGrid, epsilon: f64) -> Result<ImageGrid> {
    let z_i = model.forward(y_i)?;
    let z_j = model.forward(y_j)?;
    let n_j = y_j.sub(&z_j)?;
    let mut x = z_i;
    x.add_scaled(&n_j, epsilon)?;
    Ok(x)
}

/// Unsupervised stripe removal: each step swaps the current stripe estimate of
/// one image onto the clean estimate of another and fits the original noisy
/// image on the `k = 0` coefficients only.
///
/// Pairs come from a fresh random permutation every pass over the data, each
/// image paired with its successor, so `i != j` always holds.
pub fn usr_train<M: Model>(
    noisy: &[ImageGrid],
    mut model: M,
    epsilon: f64,
    config: &UsrConfig,
) -> Result<(M, Vec<UsrRecord>)> {
    if noisy.len() < 2 {
        return Err(Error::NeedAtLeastTwoImages(noisy.len()));
    }
    if !(epsilon.is_finite() && epsilon > 1.0) {
        return Err(invalid("epsilon", format!("amplification must exceed 1, got {epsilon}")));
    }
    config.optimizer.validate()?;
    if config.batch == 0 || config.log_every == 0 {
        return Err(invalid("batch", "batch size and log interval must be positive"));
    }
    let shape = noisy[0].shape();
    for y in noisy {
        y.ensure_shape(shape)?;
    }
    let work = match config.patch {
        Some(p) if p == 0 || p > shape.0 || p > shape.1 => {
            return Err(invalid("patch", format!("patch {p} does not fit {}x{}", shape.0, shape.1)));
        }
        Some(p) => (p, p),
        None => shape,
    };
    let engine = LossEngine::new(LossSpec::FourierK0(config.penalty), work.0, work.1)?;
    let mut opt = OptimizerState::new(config.optimizer, model.num_params());
    let mut rng = RngSeed::new(config.seed, USR_STREAM).rng();
    let mut order: Vec<usize> = (0..noisy.len()).collect();
    let mut cursor = order.len();
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut window_steps = 0usize;
    for step in 1..=config.steps {
        let mut grad = vec![0.0; model.num_params()];
        let mut step_loss = 0.0;
        for _ in 0..config.batch {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            let j = order[(cursor + 1) % order.len()];
            cursor += 1;
            let (yi, yj) = match config.patch {
                Some(p) => {
                    let a = random_crop(&mut rng, &noisy[i], p);
                    let b = random_crop(&mut rng, &noisy[j], p);
                    (crop(&noisy[i], a, Some(p)), crop(&noisy[j], b, Some(p)))
                }
                None => (noisy[i].clone(), noisy[j].clone()),
            };
            let x = usr_swap(&model, &yi, &yj, epsilon)?;
            let (f, cache) = model.forward_cached(&x)?;
            let (value, upstream) = engine.value_and_grad(&f, &yi)?;
            let g = model.backward(&cache, &upstream)?;
            check_finite(&g, value, 0, step)?;
            step_loss += value;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let inv = 1.0 / config.batch as f64;
        for g in grad.iter_mut() {
            *g *= inv;
        }
        opt.step(model.params_mut(), &grad);
        model.project();
        window += step_loss * inv;
        window_steps += 1;
        if step % config.log_every == 0 || step == config.steps {
            curve.push(UsrRecord {
                step,
                loss: window / window_steps as f64,
            });
            window = 0.0;
            window_steps = 0;
        }
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConvLayer, ConvNetModel};

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut st = OptimizerState::new(Optimizer::adam(0.1), 2);
        let mut p = [1.0, -1.0];
        st.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn wiener_limits() {
        let s = VarianceMap::from_values(4, 4, vec![2.0; 16]).unwrap();
        let z = VarianceMap::zeros(4, 4);
        let w = wiener_oracle(&s, &z).unwrap();
        assert!(w.gains().data().iter().all(|g| g.re == 1.0 && g.im == 0.0));
        let w = wiener_oracle(&s, &s).unwrap();
        assert!(w.gains().data().iter().all(|g| g.re == 0.5));
        let w = wiener_oracle(&z, &z).unwrap();
        assert!(w.gains().data().iter().all(|g| g.re == 1.0));
    }

    #[test]
    fn usr_rejects_bad_inputs() {
        let m = ConvNetModel::zeros(&[ConvLayer::new(3, 1, 1)]).unwrap();
        let cfg = UsrConfig {
            penalty: Penalty::Huber { delta: 0.03 },
            optimizer: Optimizer::default(),
            steps: 1,
            batch: 1,
            patch: None,
            seed: 0,
            log_every: 1,
        };
        let img = ImageGrid::zeros(4, 4);
        assert!(matches!(
            usr_train(&[img.clone()], m.clone(), 1.2, &cfg),
            Err(Error::NeedAtLeastTwoImages(1))
        ));
        assert!(usr_train(&[img.clone(), img], m, 1.0, &cfg).is_err());
    }
}
