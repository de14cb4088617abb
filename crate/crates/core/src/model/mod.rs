//! The full-band recurrent network.
//!
//! Each STFT frame goes through the encoder; the predictor sees the
//! *previous output* frame and estimates the current magnitude; the joiner
//! fuses both into the output frame, which is fed back on the next step.
//! Frames are flattened as `[re_0 .. re_{F-1}, im_0 .. im_{F-1}]`.

mod config;
pub mod encoder;
pub mod init;
pub mod joiner;
pub mod parity;
pub mod predictor;

use serde::{Deserialize, Serialize};

pub use config::{FrnConfig, RnnCell};
pub use encoder::{Encoder, EncoderState};
pub use init::random_archive;
pub use joiner::{Joiner, JoinerContext};
pub use parity::{export_parity_vectors, replay_parity, ParityReport, ParityVectors};
pub use predictor::Predictor;

use crate::dsp::{ComplexSpectrogram, Stft};
use crate::error::{Error, Result};
use crate::nn::archive::{ArchiveError, ARCH};
use crate::nn::rnn::{GRU_GATE_ORDER, GRU_VARIANT, LSTM_GATE_ORDER};
use crate::nn::{LstmState, WeightArchive};

/// Which parts of the network run per frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    /// Encoder output is used directly; predictor and joiner are skipped.
    EncoderOnly,
}

#[derive(Clone, Debug)]
pub struct Frn {
    pub config: FrnConfig,
    pub encoder: Encoder,
    pub predictor: Predictor,
    pub joiner: Joiner,
}

/// Everything carried between frames of one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct FrnState {
    pub encoder: EncoderState,
    pub predictor: LstmState,
    /// Previous output frame, zero at stream start.
    pub prev_output: Vec<f32>,
    pub joiner: JoinerContext,
}

impl FrnState {
    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite()
            && self.predictor.is_finite()
            && self.prev_output.iter().all(|v| v.is_finite())
            && self.joiner.is_finite()
    }

    /// Bytes held by the state's buffers.
    pub fn footprint(&self) -> usize {
        self.encoder.footprint()
            + self.joiner.footprint()
            + (self.predictor.h.capacity()
                + self.predictor.c.capacity()
                + self.prev_output.capacity())
                * std::mem::size_of::<f32>()
    }
}

impl Frn {
    pub fn from_archive(archive: &WeightArchive) -> Result<Self> {
        let arch = archive.meta("arch")?;
        if arch != ARCH {
            return Err(
                ArchiveError::ArchMismatch(format!("arch {arch:?}, expected {ARCH:?}")).into(),
            );
        }
        for (key, expected) in [
            ("gate_order.lstm", LSTM_GATE_ORDER),
            ("gate_order.gru", GRU_GATE_ORDER),
            ("gru_variant", GRU_VARIANT),
        ] {
            let found = archive.meta(key)?;
            if found != expected {
                return Err(ArchiveError::ArchMismatch(format!(
                    "{key} is {found:?}, this build implements {expected:?}"
                ))
                .into());
            }
        }
        let config = FrnConfig::from_metadata(&archive.metadata)?;
        Ok(Self {
            encoder: Encoder::from_archive(archive, &config)?,
            predictor: Predictor::from_archive(archive, &config)?,
            joiner: Joiner::from_archive(archive, &config)?,
            config,
        })
    }

    pub fn new_state(&self) -> FrnState {
        FrnState {
            encoder: self.encoder.new_state(),
            predictor: self.predictor.new_state(),
            prev_output: vec![0.0; self.config.frame_len()],
            joiner: self.joiner.new_context(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.predictor.param_count() + self.joiner.param_count()
    }

    pub fn encoder_step(&self, frame: &[f32], state: &mut EncoderState) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.config.frame_len()];
        self.encoder.step(frame, state, &mut out)?;
        Ok(out)
    }

    pub fn predictor_step(&self, prev_frame: &[f32], state: &mut LstmState) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.config.n_bins];
        self.predictor.step(prev_frame, state, &mut out)?;
        Ok(out)
    }

    pub fn joiner_step(
        &self,
        enc: &[f32],
        pred: &[f32],
        ctx: &mut JoinerContext,
    ) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.config.frame_len()];
        self.joiner.step(enc, pred, ctx, &mut out)?;
        Ok(out)
    }

    /// Conceals one input frame and feeds the result back into `state`.
    pub fn step(&self, input: &[f32], state: &mut FrnState, mode: Mode) -> Result<Vec<f32>> {
        let enc = self.encoder_step(input, &mut state.encoder)?;
        let out = match mode {
            Mode::EncoderOnly => enc,
            Mode::Full => {
                let pred = self.predictor_step(&state.prev_output, &mut state.predictor)?;
                self.joiner_step(&enc, &pred, &mut state.joiner)?
            }
        };
        state.prev_output.copy_from_slice(&out);
        Ok(out)
    }

    /// Runs every frame of `spec` through [`Frn::step`] from a fresh state.
    pub fn conceal_spectrogram(
        &self,
        spec: &ComplexSpectrogram,
        mode: Mode,
    ) -> Result<ComplexSpectrogram> {
        let f = self.config.n_bins;
        if spec.n_bins != f + 1 {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, model expects {}",
                spec.n_bins,
                f + 1
            )));
        }
        let mut state = self.new_state();
        let mut out = ComplexSpectrogram::zeros(spec.config, spec.n_frames);
        let mut frame = vec![0.0; 2 * f];
        for t in 0..spec.n_frames {
            let (re, im) = spec.frame(t);
            to_model_frame(re, im, &mut frame);
            let y = self.step(&frame, &mut state, mode)?;
            let (ore, oim) = out.frame_mut(t);
            from_model_frame(&y, ore, oim);
        }
        Ok(out)
    }

    /// STFT, per-frame concealment, and overlap-add resynthesis. The output
    /// has `synthesis_len(T)` samples for `T` analysis frames.
    pub fn conceal_utterance(&self, signal: &[f32], mode: Mode) -> Result<Vec<f32>> {
        let plan = Stft::new(self.config.stft())?;
        let x: Vec<f64> = signal.iter().map(|&v| v as f64).collect();
        let spec = plan.forward(&x)?;
        let y = plan.inverse(&self.conceal_spectrogram(&spec, mode)?)?;
        Ok(y.into_iter().map(|v| v as f32).collect())
    }
}

/// Packs a one-sided frame (F + 1 bins) into the model layout, dropping the
/// Nyquist bin.
pub fn to_model_frame(re: &[f64], im: &[f64], out: &mut [f32]) {
    let f = out.len() / 2;
    for k in 0..f {
        out[k] = re[k] as f32;
        out[f + k] = im[k] as f32;
    }
}

/// Unpacks a model frame into one-sided bins with a zero Nyquist bin.
pub fn from_model_frame(frame: &[f32], re: &mut [f64], im: &mut [f64]) {
    let f = frame.len() / 2;
    for k in 0..f {
        re[k] = frame[k] as f64;
        im[k] = frame[f + k] as f64;
    }
    re[f] = 0.0;
    im[f] = 0.0;
}
