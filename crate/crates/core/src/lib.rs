#![cfg_attr(not(test), no_std)]

//! Fourier-domain noisy supervision: noise synthesis, spectral statistics,
//! blurred penalties, Fourier losses and small trainable restoration models.

extern crate alloc;

pub mod equivalence;
pub mod error;
pub mod fft;
pub mod fourier;
pub mod grid;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod penalty;
pub mod quadrature;
pub mod stats;
pub mod train;

pub use equivalence::{argmin_check, equivalence_gap, equivalence_gap_with, mc_expected_loss, penalty_curve};
pub use error::{Error, Result};
pub use fourier::{circular_convolve, dft_forward, dft_inverse, kernel_transform, Fourier};
pub use grid::{ImageGrid, Spectrum};
pub use loss::{dataset_loss, loss_eval, loss_grad, LossSpec};
pub use metrics::{psnr, ssim, MetricsReport};
pub use model::{model_backward, model_forward, ConvLayer, ConvNetModel, Model, SpectralDiagonalModel};
pub use noise::{gen_clean, make_training_pair, sample_noise, DegradationSpec, NoiseSpec, RngSeed};
pub use penalty::{blurred_penalty_eval, BlurredPenalty, Penalty, SigmaMap};
pub use stats::{
    gaussianity_test, independence_test, monte_carlo_coeffs, sparsity_index, variance_map_empirical,
    variance_map_theoretical, CoeffSampleSet, Component, GaussianityReport, VarianceMap,
};
pub use train::{train, usr_train, wiener_oracle, Optimizer, TargetMode, TrainConfig, UsrConfig};
