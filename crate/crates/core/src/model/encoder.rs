//! Encoder: `2F -> dim` projection with GELU, a stack of residual blocks
//! (time-recurrent sublayer, then a per-frame MLP sublayer, each behind an
//! affine normalization), and a `dim -> 2F` output projection.

use crate::error::{Error, Result};
use crate::model::{FrnConfig, RnnCell};
use crate::nn::ops::gelu_scalar;
use crate::nn::{AffineNorm, GruParams, Linear, LstmParams, LstmState, WeightArchive};

#[derive(Clone, Debug)]
pub enum Recurrent {
    Gru(GruParams),
    Lstm(LstmParams),
}

#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub norm1: AffineNorm,
    pub rnn: Recurrent,
    pub norm2: AffineNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub proj_in: Linear,
    pub blocks: Vec<EncoderBlock>,
    pub proj_out: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockState {
    Gru(Vec<f32>),
    Lstm(LstmState),
}

/// Per-block recurrent state.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    pub blocks: Vec<BlockState>,
}

impl EncoderState {
    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| match b {
            BlockState::Gru(h) => h.iter().all(|v| v.is_finite()),
            BlockState::Lstm(s) => s.is_finite(),
        })
    }

    pub fn footprint(&self) -> usize {
        let floats: usize = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockState::Gru(h) => h.capacity(),
                BlockState::Lstm(s) => s.h.capacity() + s.c.capacity(),
            })
            .sum();
        floats * std::mem::size_of::<f32>()
    }
}

fn linear(a: &WeightArchive, name: &str, n_out: usize, n_in: usize) -> Result<Linear> {
    Linear::new(
        a.expect(&format!("{name}.weight"), &[n_out, n_in])?,
        a.expect(&format!("{name}.bias"), &[n_out])?,
    )
}

fn affine(a: &WeightArchive, name: &str, d: usize) -> Result<AffineNorm> {
    AffineNorm::new(
        a.expect(&format!("{name}.scale"), &[d])?,
        a.expect(&format!("{name}.bias"), &[d])?,
    )
}

impl Encoder {
    pub fn from_archive(a: &WeightArchive, cfg: &FrnConfig) -> Result<Self> {
        let (f2, d) = (cfg.frame_len(), cfg.dim);
        let blocks = (0..cfg.n_blocks)
            .map(|i| {
                let p = format!("encoder.blocks.{i}");
                let rows = cfg.encoder_cell.gates() * d;
                let w_ih = a.expect(&format!("{p}.rnn.w_ih"), &[rows, d])?;
                let w_hh = a.expect(&format!("{p}.rnn.w_hh"), &[rows, d])?;
                let b_ih = a.expect(&format!("{p}.rnn.b_ih"), &[rows])?;
                let b_hh = a.expect(&format!("{p}.rnn.b_hh"), &[rows])?;
                let rnn = match cfg.encoder_cell {
                    RnnCell::Gru => Recurrent::Gru(GruParams::new(w_ih, w_hh, b_ih, b_hh)?),
                    RnnCell::Lstm => Recurrent::Lstm(LstmParams::new(w_ih, w_hh, b_ih, b_hh)?),
                };
                Ok(EncoderBlock {
                    norm1: affine(a, &format!("{p}.norm1"), d)?,
                    rnn,
                    norm2: affine(a, &format!("{p}.norm2"), d)?,
                    fc1: linear(a, &format!("{p}.mlp.fc1"), cfg.mlp_hidden, d)?,
                    fc2: linear(a, &format!("{p}.mlp.fc2"), d, cfg.mlp_hidden)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            proj_in: linear(a, "encoder.proj_in", d, f2)?,
            blocks,
            proj_out: linear(a, "encoder.proj_out", f2, d)?,
        })
    }

    pub fn new_state(&self) -> EncoderState {
        let d = self.proj_in.n_out;
        EncoderState {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b.rnn {
                    Recurrent::Gru(_) => BlockState::Gru(vec![0.0; d]),
                    Recurrent::Lstm(_) => BlockState::Lstm(LstmState::zeros(d)),
                })
                .collect(),
        }
    }

    /// Enhances one flattened `[re; im]` frame, advancing every block's
    /// recurrent state by exactly one step.
    pub fn step(&self, frame: &[f32], state: &mut EncoderState, out: &mut [f32]) -> Result<()> {
        if frame.len() != self.proj_in.n_in || out.len() != self.proj_out.n_out {
            return Err(Error::ShapeMismatch(format!(
                "encoder expects {} -> {}, got {} -> {}",
                self.proj_in.n_in,
                self.proj_out.n_out,
                frame.len(),
                out.len()
            )));
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFrame);
        }
        let d = self.proj_in.n_out;
        let mut x = vec![0.0; d];
        self.proj_in.forward(frame, &mut x);
        x.iter_mut().for_each(|v| *v = gelu_scalar(*v));

        let mut normed = vec![0.0; d];
        let mut mlp_out = vec![0.0; d];
        for (block, st) in self.blocks.iter().zip(&mut state.blocks) {
            block.norm1.forward(&x, &mut normed);
            let h: &[f32] = match (&block.rnn, st) {
                (Recurrent::Gru(p), BlockState::Gru(h)) => {
                    p.step(&normed, h)?;
                    h
                }
                (Recurrent::Lstm(p), BlockState::Lstm(s)) => {
                    p.step(&normed, s)?;
                    &s.h
                }
                _ => {
                    return Err(Error::ShapeMismatch(
                        "encoder state does not match the block cell type".into(),
                    ))
                }
            };
            x.iter_mut().zip(h).for_each(|(a, b)| *a += b);

            block.norm2.forward(&x, &mut normed);
            let mut hidden = vec![0.0; block.fc1.n_out];
            block.fc1.forward(&normed, &mut hidden);
            hidden.iter_mut().for_each(|v| *v = gelu_scalar(*v));
            block.fc2.forward(&hidden, &mut mlp_out);
            x.iter_mut().zip(&mlp_out).for_each(|(a, b)| *a += b);
        }
        self.proj_out.forward(&x, out);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.proj_in.param_count()
            + self.proj_out.param_count()
            + self
                .blocks
                .iter()
                .map(|b| {
                    b.norm1.param_count()
                        + b.norm2.param_count()
                        + b.fc1.param_count()
                        + b.fc2.param_count()
                        + match &b.rnn {
                            Recurrent::Gru(p) => p.param_count(),
                            Recurrent::Lstm(p) => p.param_count(),
                        }
                })
                .sum::<usize>()
    }
}
