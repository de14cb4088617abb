//! Joiner: stacks encoder real/imag and predictor magnitude as three
//! channels and mixes them with two time-causal convolutions into a complex
//! output frame.

use crate::error::{Error, Result};
use crate::model::FrnConfig;
use crate::nn::{CausalConv2d, ConvContext, WeightArchive};

#[derive(Clone, Debug)]
pub struct Joiner {
    pub conv1: CausalConv2d,
    pub conv2: CausalConv2d,
    pub n_freq: usize,
}

/// Past frames both conv layers need.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinerContext {
    pub conv1: ConvContext,
    pub conv2: ConvContext,
}

impl JoinerContext {
    pub fn is_finite(&self) -> bool {
        self.conv1.is_finite() && self.conv2.is_finite()
    }

    pub fn footprint(&self) -> usize {
        self.conv1.footprint() + self.conv2.footprint()
    }
}

impl Joiner {
    pub fn from_archive(a: &WeightArchive, cfg: &FrnConfig) -> Result<Self> {
        let (kf, kt, hid, g) = (
            cfg.joiner_kernel_freq,
            cfg.joiner_kernel_time,
            cfg.joiner_hidden,
            cfg.joiner_groups,
        );
        let conv1 = CausalConv2d::new(
            a.expect("joiner.conv1.weight", &[hid, 3 / g, kf, kt])?,
            a.expect("joiner.conv1.bias", &[hid])?,
            3,
            g,
        )?;
        let conv2 = CausalConv2d::new(
            a.expect("joiner.conv2.weight", &[2, hid, kf, kt])?,
            a.expect("joiner.conv2.bias", &[2])?,
            hid,
            1,
        )?;
        Ok(Self {
            conv1,
            conv2,
            n_freq: cfg.n_bins,
        })
    }

    pub fn new_context(&self) -> JoinerContext {
        JoinerContext {
            conv1: ConvContext::new(&self.conv1, self.n_freq),
            conv2: ConvContext::new(&self.conv2, self.n_freq),
        }
    }

    /// `enc` is `[re; im]` (2F), `pred` is the magnitude (F). Writes the
    /// `[re; im]` output frame and advances `ctx`.
    pub fn step(
        &self,
        enc: &[f32],
        pred: &[f32],
        ctx: &mut JoinerContext,
        out: &mut [f32],
    ) -> Result<()> {
        let f = self.n_freq;
        if enc.len() != 2 * f || pred.len() != f || out.len() != 2 * f {
            return Err(Error::ShapeMismatch(format!(
                "joiner expects 2x{f} + {f} -> 2x{f}, got {} + {} -> {}",
                enc.len(),
                pred.len(),
                out.len()
            )));
        }
        // Channel-major stack: [enc_re, enc_im, pred].
        let mut stacked = Vec::with_capacity(3 * f);
        stacked.extend_from_slice(enc);
        stacked.extend_from_slice(pred);
        let mut hidden = vec![0.0; self.conv1.c_out * f];
        self.conv1.step(&mut ctx.conv1, &stacked, f, &mut hidden);
        self.conv2.step(&mut ctx.conv2, &hidden, f, out);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count() + self.conv2.param_count()
    }
}
