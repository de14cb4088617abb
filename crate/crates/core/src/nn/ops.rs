//! Dense layers and elementwise activations.

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// `out = W x + b` for a row-major `W` of shape `[out.len(), x.len()]`.
#[inline]
pub(crate) fn matvec_bias(w: &[f32], b: &[f32], x: &[f32], out: &mut [f32]) {
    let n_in = x.len();
    for ((o, row), bias) in out.iter_mut().zip(w.chunks_exact(n_in)).zip(b) {
        *o = dot(row, x) + bias;
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Exact GELU, `x * Phi(x)`.
#[inline]
pub fn gelu_scalar(x: f32) -> f32 {
    0.5 * x * (1.0 + libm::erff(x * std::f32::consts::FRAC_1_SQRT_2))
}

/// Affine layer with weights `[out, in]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new(weight: &Tensor, bias: &Tensor) -> Result<Self> {
        let [n_out, n_in] = weight.shape() else {
            return Err(Error::ShapeMismatch(format!(
                "linear weight must be 2-D, got {:?}",
                weight.shape()
            )));
        };
        if bias.shape() != [*n_out] {
            return Err(Error::ShapeMismatch(format!(
                "linear bias {:?} does not match {n_out} outputs",
                bias.shape()
            )));
        }
        Ok(Self {
            weight: weight.data().to_vec(),
            bias: bias.data().to_vec(),
            n_in: *n_in,
            n_out: *n_out,
        })
    }

    #[inline]
    pub fn forward(&self, x: &[f32], out: &mut [f32]) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(out.len(), self.n_out);
        matvec_bias(&self.weight, &self.bias, x, out);
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Elementwise `scale * x + bias` along the trailing dimension.
#[derive(Clone, Debug)]
pub struct AffineNorm {
    pub scale: Vec<f32>,
    pub bias: Vec<f32>,
}

impl AffineNorm {
    pub fn new(scale: &Tensor, bias: &Tensor) -> Result<Self> {
        if scale.shape().len() != 1 || scale.shape() != bias.shape() {
            return Err(Error::ShapeMismatch(format!(
                "affine scale {:?} / bias {:?} must be equal-length vectors",
                scale.shape(),
                bias.shape()
            )));
        }
        Ok(Self {
            scale: scale.data().to_vec(),
            bias: bias.data().to_vec(),
        })
    }

    #[inline]
    pub fn forward(&self, x: &[f32], out: &mut [f32]) {
        for (((o, &v), s), b) in out.iter_mut().zip(x).zip(&self.scale).zip(&self.bias) {
            *o = s * v + b;
        }
    }

    pub fn param_count(&self) -> usize {
        self.scale.len() + self.bias.len()
    }
}

/// Affine map along the trailing dimension of `x`: `[..., in] -> [..., out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let layer = Linear::new(w, b)?;
    if x.trailing_dim() != layer.n_in {
        return Err(Error::ShapeMismatch(format!(
            "input trailing dim {} does not match weight input {}",
            x.trailing_dim(),
            layer.n_in
        )));
    }
    let rows = x.len() / layer.n_in.max(1);
    let mut out = vec![0.0; rows * layer.n_out];
    for (xi, oi) in x
        .data()
        .chunks_exact(layer.n_in)
        .zip(out.chunks_exact_mut(layer.n_out))
    {
        layer.forward(xi, oi);
    }
    let mut shape = x.shape().to_vec();
    match shape.last_mut() {
        Some(last) => *last = layer.n_out,
        None => shape.push(layer.n_out),
    }
    Tensor::new(shape, out)
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

pub fn affine_norm(x: &Tensor, scale: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let aff = AffineNorm::new(scale, bias)?;
    let d = aff.scale.len();
    if x.trailing_dim() != d {
        return Err(Error::ShapeMismatch(format!(
            "input trailing dim {} does not match affine width {d}",
            x.trailing_dim()
        )));
    }
    let mut out = x.clone();
    for (xi, oi) in x
        .data()
        .chunks_exact(d)
        .zip(out.data_mut().chunks_exact_mut(d))
    {
        aff.forward(xi, oi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn linear_identity_and_hand_example() {
        let x = t(&[2], &[1.0, 2.0]);
        let eye = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let zero = t(&[2], &[0.0, 0.0]);
        assert_eq!(linear(&x, &eye, &zero).unwrap(), x);

        let w = t(&[2, 2], &[1.0, 1.0, 0.0, 1.0]);
        let b = t(&[2], &[0.5, 0.0]);
        assert_eq!(linear(&x, &w, &b).unwrap().data(), &[3.5, 2.0]);

        let zx = Tensor::zeros(vec![3, 2]);
        let out = linear(&zx, &w, &b).unwrap();
        assert_eq!(out.shape(), &[3, 2]);
        assert_eq!(out.data(), &[0.5, 0.0, 0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn linear_shape_mismatch() {
        let x = t(&[3], &[1.0, 2.0, 3.0]);
        let w = Tensor::zeros(vec![2, 2]);
        let b = Tensor::zeros(vec![2]);
        assert!(linear(&x, &w, &b).is_err());
        assert!(linear(&t(&[2], &[1.0, 1.0]), &w, &Tensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn dot_matches_naive_on_odd_lengths() {
        for n in [1, 7, 8, 9, 31, 384] {
            let a: Vec<f32> = (0..n).map(|i| (i as f32 * 0.13).sin()).collect();
            let b: Vec<f32> = (0..n).map(|i| (i as f32 * 0.71).cos()).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
            assert!((dot(&a, &b) as f64 - naive).abs() < 1e-4);
        }
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(10.0) - 10.0).abs() < 1e-6);
        assert!((gelu_scalar(1.0) - 0.841_345).abs() < 1e-6);
        // Phi(-1) = 0.158655
        assert!((gelu_scalar(-1.0) + 0.158_655).abs() < 1e-6);
    }

    #[test]
    fn affine_norm_cases() {
        let x = t(&[2, 2], &[1.0, -2.0, 3.0, 0.5]);
        let ones = t(&[2], &[1.0, 1.0]);
        let zeros = t(&[2], &[0.0, 0.0]);
        assert_eq!(affine_norm(&x, &ones, &zeros).unwrap(), x);

        let one = t(&[1], &[1.0]);
        let out = affine_norm(&one, &t(&[1], &[2.0]), &t(&[1], &[-1.0])).unwrap();
        assert_eq!(out.data(), &[1.0]);

        // Two affine maps compose into one with scale s2*s1, bias s2*b1 + b2.
        let (s1, b1) = (t(&[2], &[0.5, -3.0]), t(&[2], &[1.0, 0.25]));
        let (s2, b2) = (t(&[2], &[2.0, 0.1]), t(&[2], &[-0.5, 4.0]));
        let twice = affine_norm(&affine_norm(&x, &s1, &b1).unwrap(), &s2, &b2).unwrap();
        let s: Vec<f32> = s1
            .data()
            .iter()
            .zip(s2.data())
            .map(|(a, b)| a * b)
            .collect();
        let b: Vec<f32> = b1
            .data()
            .iter()
            .zip(s2.data())
            .zip(b2.data())
            .map(|((b1, s2), b2)| s2 * b1 + b2)
            .collect();
        let once = affine_norm(&x, &t(&[2], &s), &t(&[2], &b)).unwrap();
        for (p, q) in twice.data().iter().zip(once.data()) {
            assert!((p - q).abs() < 1e-6);
        }

        assert!(affine_norm(&x, &t(&[3], &[1.0; 3]), &t(&[3], &[0.0; 3])).is_err());
    }
}
