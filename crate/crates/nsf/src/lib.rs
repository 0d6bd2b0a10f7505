//! Experiment runner for Fourier-domain noisy supervision: configuration,
//! image and model files, CSV/SVG reports and the six subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod image_io;
pub mod model_io;
pub mod noise_config;
pub mod parallel;
pub mod report;
