//! Signal-processing primitives: STFT/iSTFT, Mel filterbank, compressed
//! magnitudes.

pub mod mel;
pub mod stft;

pub use mel::{build_mel_filterbank, log_mel, MelConfig, MelFilterbank, DEFAULT_LOG_FLOOR};
pub use stft::{
    compressed_magnitude, istft, stft, ComplexSpectrogram, MagnitudeSpectrogram, Stft, StftConfig,
    Window,
};
