//! Grouped 2-D convolution over (frequency, time) that is causal in time.
//!
//! Weights are `[c_out, c_in / groups, k_freq, k_time]`. Time is padded with
//! `k_time - 1` zero frames on the past side only; frequency is padded
//! symmetrically with `(k_freq - 1) / 2` zero bins, so `k_freq` must be odd.
//! The last time tap (`k_time - 1`) multiplies the current frame.

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Debug)]
pub struct CausalConv2d {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub c_in: usize,
    pub c_out: usize,
    pub groups: usize,
    pub k_freq: usize,
    pub k_time: usize,
}

impl CausalConv2d {
    pub fn new(weight: &Tensor, bias: &Tensor, c_in: usize, groups: usize) -> Result<Self> {
        let [c_out, per_group, k_freq, k_time] = weight.shape() else {
            return Err(Error::ShapeMismatch(format!(
                "conv weight must be 4-D, got {:?}",
                weight.shape()
            )));
        };
        let (c_out, per_group, k_freq, k_time) = (*c_out, *per_group, *k_freq, *k_time);
        if groups == 0 || !c_in.is_multiple_of(groups) || c_out % groups != 0 {
            return Err(Error::ShapeMismatch(format!(
                "channels {c_in} -> {c_out} are not divisible by {groups} groups"
            )));
        }
        if per_group != c_in / groups {
            return Err(Error::ShapeMismatch(format!(
                "conv weight has {per_group} input channels per group, expected {}",
                c_in / groups
            )));
        }
        if k_freq % 2 == 0 || k_time == 0 {
            return Err(Error::ShapeMismatch(format!(
                "kernel {k_freq}x{k_time} needs an odd frequency size and nonzero time size"
            )));
        }
        if bias.shape() != [c_out] {
            return Err(Error::ShapeMismatch(format!(
                "conv bias {:?} should be [{c_out}]",
                bias.shape()
            )));
        }
        Ok(Self {
            weight: weight.data().to_vec(),
            bias: bias.data().to_vec(),
            c_in,
            c_out,
            groups,
            k_freq,
            k_time,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    fn w(&self, o: usize, ci: usize, a: usize, b: usize) -> f32 {
        let per_group = self.c_in / self.groups;
        self.weight[((o * per_group + ci) * self.k_freq + a) * self.k_time + b]
    }

    /// Computes one output frame. `frames[b]` is the channel-major
    /// (`c * n_freq + f`) input frame aligned with time tap `b`.
    fn frame_output(&self, frames: &[&[f32]], n_freq: usize, out: &mut [f32]) {
        let per_in = self.c_in / self.groups;
        let per_out = self.c_out / self.groups;
        let pad = (self.k_freq - 1) / 2;
        for o in 0..self.c_out {
            let g = o / per_out;
            let row = &mut out[o * n_freq..(o + 1) * n_freq];
            row.fill(self.bias[o]);
            for ci in 0..per_in {
                let c = g * per_in + ci;
                for (b, frame) in frames.iter().enumerate() {
                    let x = &frame[c * n_freq..(c + 1) * n_freq];
                    for a in 0..self.k_freq {
                        let w = self.w(o, ci, a, b);
                        if w == 0.0 {
                            continue;
                        }
                        // output bin f reads input bin f + a - pad
                        let lo = pad.saturating_sub(a);
                        let hi = (n_freq + pad).saturating_sub(a).min(n_freq);
                        for f in lo..hi {
                            row[f] += w * x[f + a - pad];
                        }
                    }
                }
            }
        }
    }
}

/// Past input frames a [`CausalConv2d`] needs when run frame by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvContext {
    /// `k_time - 1` frames, oldest first, each `c_in * n_freq` long.
    history: Vec<Vec<f32>>,
}

impl ConvContext {
    pub fn new(conv: &CausalConv2d, n_freq: usize) -> Self {
        Self {
            history: vec![vec![0.0; conv.c_in * n_freq]; conv.k_time - 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.history.iter().flatten().all(|v| v.is_finite())
    }

    pub fn footprint(&self) -> usize {
        self.history.iter().map(|h| h.capacity()).sum::<usize>() * std::mem::size_of::<f32>()
    }
}

impl CausalConv2d {
    /// Streams one frame through the layer, updating `ctx`.
    pub fn step(&self, ctx: &mut ConvContext, frame: &[f32], n_freq: usize, out: &mut [f32]) {
        debug_assert_eq!(frame.len(), self.c_in * n_freq);
        debug_assert_eq!(out.len(), self.c_out * n_freq);
        {
            let mut frames: Vec<&[f32]> = ctx.history.iter().map(Vec::as_slice).collect();
            frames.push(frame);
            self.frame_output(&frames, n_freq, out);
        }
        if !ctx.history.is_empty() {
            ctx.history.rotate_left(1);
            ctx.history.last_mut().unwrap().copy_from_slice(frame);
        }
    }
}

/// Whole-tensor form: `x` is `[c_in, n_freq, n_time]`, result is
/// `[c_out, n_freq, n_time]`.
pub fn causal_grouped_conv2d(
    x: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    groups: usize,
) -> Result<Tensor> {
    let [c_in, n_freq, n_time] = x.shape() else {
        return Err(Error::ShapeMismatch(format!(
            "conv input must be [C, F, T], got {:?}",
            x.shape()
        )));
    };
    let (c_in, n_freq, n_time) = (*c_in, *n_freq, *n_time);
    let conv = CausalConv2d::new(weight, bias, c_in, groups)?;
    let pad = (conv.k_freq - 1) as isize / 2;
    let xd = x.data();
    let at = |c: usize, f: isize, t: isize| -> f32 {
        if f < 0 || f >= n_freq as isize || t < 0 {
            0.0
        } else {
            xd[(c * n_freq + f as usize) * n_time + t as usize]
        }
    };
    let per_in = c_in / groups;
    let per_out = conv.c_out / groups;
    let mut out = vec![0.0; conv.c_out * n_freq * n_time];
    for o in 0..conv.c_out {
        let g = o / per_out;
        for f in 0..n_freq {
            for t in 0..n_time {
                let mut acc = conv.bias[o];
                for ci in 0..per_in {
                    for a in 0..conv.k_freq {
                        for b in 0..conv.k_time {
                            let tt = t as isize + b as isize - (conv.k_time as isize - 1);
                            let ff = f as isize + a as isize - pad;
                            acc += conv.w(o, ci, a, b) * at(g * per_in + ci, ff, tt);
                        }
                    }
                }
                out[(o * n_freq + f) * n_time + t] = acc;
            }
        }
    }
    Tensor::new(vec![conv.c_out, n_freq, n_time], out)
}
