use super::Tensor;
use crate::error::{shape_err, Result};

pub const LN_EPS: f32 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub gain: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerNormParams {
    pub fn new(gain: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if gain.len() != bias.len() {
            return Err(shape_err!(
                "layer norm gain/bias lengths differ: {} vs {}",
                gain.len(),
                bias.len()
            ));
        }
        Ok(Self { gain, bias })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }
}

#[inline]
pub fn layer_norm_into(p: &LayerNormParams, x: &[f32], out: &mut [f32]) {
    let n = x.len() as f32;
    let mut mean = 0.0f32;
    for v in x {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0f32;
    for v in x {
        let d = v - mean;
        var += d * d;
    }
    var /= n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    for (i, y) in out.iter_mut().enumerate() {
        *y = (x[i] - mean) * inv * p.gain[i] + p.bias[i];
    }
}

/// Normalizes every vector along the last axis to zero mean and unit
/// variance, then applies gain and bias.
pub fn layer_norm(p: &LayerNormParams, x: &Tensor) -> Result<Tensor> {
    let d = p.dim();
    if x.shape().is_empty() || x.last_dim() != d {
        return Err(shape_err!(
            "layer_norm: input {:?} does not end in {d}",
            x.shape()
        ));
    }
    let mut out = Tensor::zeros(x.shape());
    for (src, dst) in x.data().chunks(d).zip(out.data_mut().chunks_mut(d)) {
        layer_norm_into(p, src, dst);
    }
    Ok(out)
}
