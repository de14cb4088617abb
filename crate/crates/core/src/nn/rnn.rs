//! Single-step recurrent cells.
//!
//! Gate layout inside the stacked weight matrices is fixed:
//! LSTM rows are `[i, f, g, o]`, GRU rows are `[r, z, n]`. The GRU candidate
//! applies the reset gate to the hidden state *before* the recurrent matmul:
//! `n = tanh(W_in x + b_in + W_hn (r * h) + b_hn)`.

use crate::error::{Error, Result};
use crate::nn::ops::{dot, matvec_bias, sigmoid};
use crate::nn::Tensor;

pub const LSTM_GATE_ORDER: &str = "i,f,g,o";
pub const GRU_GATE_ORDER: &str = "r,z,n";
pub const GRU_VARIANT: &str = "reset-before-matmul";

fn check_gates(
    name: &str,
    gates: usize,
    w_ih: &Tensor,
    w_hh: &Tensor,
    b_ih: &Tensor,
    b_hh: &Tensor,
) -> Result<(usize, usize)> {
    let (rows, input) = match w_ih.shape() {
        [r, i] => (*r, *i),
        s => {
            return Err(Error::ShapeMismatch(format!(
                "{name} w_ih must be 2-D, got {s:?}"
            )));
        }
    };
    if rows % gates != 0 || rows == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{name} w_ih has {rows} rows, not a multiple of {gates} gates"
        )));
    }
    let hidden = rows / gates;
    if w_hh.shape() != [rows, hidden] {
        return Err(Error::ShapeMismatch(format!(
            "{name} w_hh {:?} should be [{rows}, {hidden}]",
            w_hh.shape()
        )));
    }
    if b_ih.shape() != [rows] || b_hh.shape() != [rows] {
        return Err(Error::ShapeMismatch(format!(
            "{name} biases {:?}/{:?} should be [{rows}]",
            b_ih.shape(),
            b_hh.shape()
        )));
    }
    Ok((input, hidden))
}

#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w_ih: Vec<f32>,
    pub w_hh: Vec<f32>,
    pub b_ih: Vec<f32>,
    pub b_hh: Vec<f32>,
    pub input_size: usize,
    pub hidden_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

impl LstmParams {
    pub fn new(w_ih: &Tensor, w_hh: &Tensor, b_ih: &Tensor, b_hh: &Tensor) -> Result<Self> {
        let (input_size, hidden_size) = check_gates("lstm", 4, w_ih, w_hh, b_ih, b_hh)?;
        Ok(Self {
            w_ih: w_ih.data().to_vec(),
            w_hh: w_hh.data().to_vec(),
            b_ih: b_ih.data().to_vec(),
            b_hh: b_hh.data().to_vec(),
            input_size,
            hidden_size,
        })
    }

    pub fn param_count(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.b_ih.len() + self.b_hh.len()
    }

    /// Advances `state` by one input vector. The new hidden vector is left in
    /// `state.h`.
    pub fn step(&self, x: &[f32], state: &mut LstmState) -> Result<()> {
        let hs = self.hidden_size;
        if x.len() != self.input_size || state.h.len() != hs || state.c.len() != hs {
            return Err(Error::ShapeMismatch(format!(
                "lstm expects input {} / hidden {}, got {} / {} / {}",
                self.input_size,
                hs,
                x.len(),
                state.h.len(),
                state.c.len()
            )));
        }
        let mut gates = vec![0.0; 4 * hs];
        matvec_bias(&self.w_ih, &self.b_ih, x, &mut gates);
        for (g, (row, b)) in gates
            .iter_mut()
            .zip(self.w_hh.chunks_exact(hs).zip(&self.b_hh))
        {
            *g += dot(row, &state.h) + b;
        }
        let (i, rest) = gates.split_at(hs);
        let (f, rest) = rest.split_at(hs);
        let (g, o) = rest.split_at(hs);
        for k in 0..hs {
            let c = sigmoid(f[k]) * state.c[k] + sigmoid(i[k]) * g[k].tanh();
            state.c[k] = c;
            state.h[k] = sigmoid(o[k]) * c.tanh();
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_ih: Vec<f32>,
    pub w_hh: Vec<f32>,
    pub b_ih: Vec<f32>,
    pub b_hh: Vec<f32>,
    pub input_size: usize,
    pub hidden_size: usize,
}

impl GruParams {
    pub fn new(w_ih: &Tensor, w_hh: &Tensor, b_ih: &Tensor, b_hh: &Tensor) -> Result<Self> {
        let (input_size, hidden_size) = check_gates("gru", 3, w_ih, w_hh, b_ih, b_hh)?;
        Ok(Self {
            w_ih: w_ih.data().to_vec(),
            w_hh: w_hh.data().to_vec(),
            b_ih: b_ih.data().to_vec(),
            b_hh: b_hh.data().to_vec(),
            input_size,
            hidden_size,
        })
    }

    pub fn param_count(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.b_ih.len() + self.b_hh.len()
    }

    /// Advances the hidden vector `h` in place.
    pub fn step(&self, x: &[f32], h: &mut [f32]) -> Result<()> {
        let hs = self.hidden_size;
        if x.len() != self.input_size || h.len() != hs {
            return Err(Error::ShapeMismatch(format!(
                "gru expects input {} / hidden {}, got {} / {}",
                self.input_size,
                hs,
                x.len(),
                h.len()
            )));
        }
        let mut gi = vec![0.0; 3 * hs];
        matvec_bias(&self.w_ih, &self.b_ih, x, &mut gi);
        let mut rz = vec![0.0; 2 * hs];
        matvec_bias(&self.w_hh[..2 * hs * hs], &self.b_hh[..2 * hs], h, &mut rz);
        let mut rh = vec![0.0; hs];
        let mut z = vec![0.0; hs];
        for k in 0..hs {
            let r = sigmoid(gi[k] + rz[k]);
            z[k] = sigmoid(gi[hs + k] + rz[hs + k]);
            rh[k] = r * h[k];
        }
        let mut n = vec![0.0; hs];
        matvec_bias(&self.w_hh[2 * hs * hs..], &self.b_hh[2 * hs..], &rh, &mut n);
        for k in 0..hs {
            let cand = (gi[2 * hs + k] + n[k]).tanh();
            h[k] = (1.0 - z[k]) * cand + z[k] * h[k];
        }
        Ok(())
    }
}

/// Functional form: returns `(h', (h', c'))`.
pub fn lstm_step(x: &[f32], state: &LstmState, p: &LstmParams) -> Result<(Vec<f32>, LstmState)> {
    let mut next = state.clone();
    p.step(x, &mut next)?;
    Ok((next.h.clone(), next))
}

/// Functional form: returns `(h', h')`.
pub fn gru_step(x: &[f32], h: &[f32], p: &GruParams) -> Result<(Vec<f32>, Vec<f32>)> {
    let mut next = h.to_vec();
    p.step(x, &mut next)?;
    Ok((next.clone(), next))
}
