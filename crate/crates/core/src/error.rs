use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid {height}x{width}: {reason}")]
    InvalidGrid {
        height: usize,
        width: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("spectrum is not Hermitian: reconstructed imaginary residue {residue:e}")]
    HermitianViolation { residue: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("bin ({k}, {l}) outside a {height}x{width} spectrum")]
    InvalidBin {
        k: usize,
        l: usize,
        height: usize,
        width: usize,
    },

    #[error("bins ({k1}, {l1}) and ({k2}, {l2}) are Hermitian conjugates")]
    ConjugatePairRejected {
        k1: usize,
        l1: usize,
        k2: usize,
        l2: usize,
    },

    #[error("sample sets are not paired: {left} vs {right} draws")]
    UnpairedSamples { left: usize, right: usize },

    #[error("penalty |t|^{q} is not differentiable at t = 0")]
    NonDifferentiable { q: f64 },

    #[error("training diverged at epoch {epoch} (step {step}): non-finite loss")]
    DivergenceDetected { epoch: usize, step: usize },

    #[error("unsupervised stripe removal needs at least two images, got {0}")]
    NeedAtLeastTwoImages(usize),

    #[error("dataset is empty")]
    EmptyDataset,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
