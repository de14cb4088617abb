use std::path::PathBuf;

use crate::nn::archive::ArchiveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid STFT configuration: {0}")]
    InvalidStftConfig(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("negative magnitude at bin {bin}")]
    NegativeMagnitude { bin: usize },

    #[error("compression exponent must be positive, got {0}")]
    InvalidExponent(f64),

    #[error("non-finite frame")]
    NonFiniteFrame,

    #[error("invalid Markov chain ({p_n}, {p_l}): {reason}")]
    InvalidChain {
        p_n: f64,
        p_l: f64,
        reason: &'static str,
    },

    #[error("trace underrun: signal needs {needed} packets, trace has {available}")]
    TraceUnderrun { needed: usize, available: usize },

    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("undefined spectral convergence: reference spectrum is identically zero")]
    UndefinedSpectralConvergence,

    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error("stream poisoned by non-finite values; reset it before reuse")]
    StreamPoisoned,

    #[error("unsupported WAV {path}: {reason}")]
    UnsupportedWav { path: PathBuf, reason: String },

    #[error(transparent)]
    Archive(#[from] ArchiveError),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
