//! Predictor: estimates the current frame's magnitude from the previous
//! output frame via log-Mel features, an LSTM, a Mel-width projection and a
//! learnable inverse-Mel layer (`exp`, linear, `abs`).

use crate::dsp::{build_mel_filterbank, MelFilterbank, DEFAULT_LOG_FLOOR};
use crate::error::{Error, Result};
use crate::model::FrnConfig;
use crate::nn::{Linear, LstmParams, LstmState, WeightArchive};

/// Added under the square root of the magnitude so gradients stay finite at
/// zero during training; kept here for numerical parity.
pub const MAGNITUDE_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Predictor {
    pub mel: MelFilterbank,
    pub lstm: LstmParams,
    pub proj: Linear,
    pub inv_mel: Linear,
}

impl Predictor {
    pub fn from_archive(a: &WeightArchive, cfg: &FrnConfig) -> Result<Self> {
        let (h, m, f) = (cfg.predictor_hidden, cfg.n_mels, cfg.n_bins);
        let lstm = LstmParams::new(
            a.expect("predictor.lstm.w_ih", &[4 * h, m])?,
            a.expect("predictor.lstm.w_hh", &[4 * h, h])?,
            a.expect("predictor.lstm.b_ih", &[4 * h])?,
            a.expect("predictor.lstm.b_hh", &[4 * h])?,
        )?;
        let proj = Linear::new(
            a.expect("predictor.proj.weight", &[m, h])?,
            a.expect("predictor.proj.bias", &[m])?,
        )?;
        let inv_mel = Linear::new(
            a.expect("predictor.inv_mel.weight", &[f, m])?,
            a.expect("predictor.inv_mel.bias", &[f])?,
        )?;
        Ok(Self {
            mel: build_mel_filterbank(&cfg.mel())?,
            lstm,
            proj,
            inv_mel,
        })
    }

    pub fn new_state(&self) -> LstmState {
        LstmState::zeros(self.lstm.hidden_size)
    }

    /// Log-Mel features of the magnitude of a flattened `[re; im]` frame.
    pub fn features(&self, prev_frame: &[f32]) -> Vec<f32> {
        let f = self.mel.n_bins;
        let (re, im) = prev_frame.split_at(f);
        let magnitude: Vec<f64> = re
            .iter()
            .zip(im)
            .map(|(&r, &i)| {
                let (r, i) = (r as f64, i as f64);
                (r * r + i * i + MAGNITUDE_EPS).sqrt()
            })
            .collect();
        let mut mel = vec![0.0; self.mel.n_mels];
        self.mel.apply(&magnitude, &mut mel);
        mel.iter()
            .map(|&v| (v + DEFAULT_LOG_FLOOR).ln() as f32)
            .collect()
    }

    /// Predicts the current magnitude frame (length F, elementwise >= 0).
    pub fn step(&self, prev_frame: &[f32], state: &mut LstmState, out: &mut [f32]) -> Result<()> {
        let f = self.mel.n_bins;
        if prev_frame.len() != 2 * f || out.len() != f {
            return Err(Error::ShapeMismatch(format!(
                "predictor expects {} -> {f}, got {} -> {}",
                2 * f,
                prev_frame.len(),
                out.len()
            )));
        }
        if prev_frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFrame);
        }
        let features = self.features(prev_frame);
        self.lstm.step(&features, state)?;
        let mut mel = vec![0.0; self.proj.n_out];
        self.proj.forward(&state.h, &mut mel);
        mel.iter_mut().for_each(|v| *v = v.exp());
        self.inv_mel.forward(&mel, out);
        out.iter_mut().for_each(|v| *v = v.abs());
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.lstm.param_count() + self.proj.param_count() + self.inv_mel.param_count()
    }
}
