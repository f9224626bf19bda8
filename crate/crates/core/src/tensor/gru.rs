use super::{linear_into, Tensor};
use crate::error::{shape_err, Result};

/// Gated recurrent unit with gates stacked in (reset, update, candidate)
/// order: `w_ih` is `[3H, I]`, `w_hh` is `[3H, H]`.
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
/// h' = (1 - z) ⊙ n + z ⊙ h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_ih: Vec<f32>,
    pub w_hh: Vec<f32>,
    pub b_ih: Vec<f32>,
    pub b_hh: Vec<f32>,
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl GruParams {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        w_ih: Vec<f32>,
        w_hh: Vec<f32>,
        b_ih: Vec<f32>,
        b_hh: Vec<f32>,
    ) -> Result<Self> {
        let g = 3 * hidden_dim;
        if w_ih.len() != g * input_dim
            || w_hh.len() != g * hidden_dim
            || b_ih.len() != g
            || b_hh.len() != g
        {
            return Err(shape_err!(
                "GRU parameters inconsistent with input {input_dim}, hidden {hidden_dim}"
            ));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            w_ih,
            w_hh,
            b_ih,
            b_hh,
        })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 3 * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            w_ih: vec![0.0; g * input_dim],
            w_hh: vec![0.0; g * hidden_dim],
            b_ih: vec![0.0; g],
            b_hh: vec![0.0; g],
        }
    }

    /// One recurrence step, updating `h` in place. `scratch` must hold at
    /// least `6 * hidden_dim` values.
    pub fn step(&self, x: &[f32], h: &mut [f32], scratch: &mut [f32]) {
        let hd = self.hidden_dim;
        let (gi, rest) = scratch.split_at_mut(3 * hd);
        let gh = &mut rest[..3 * hd];
        linear_into(&self.w_ih, Some(&self.b_ih), x, gi);
        linear_into(&self.w_hh, Some(&self.b_hh), h, gh);
        for k in 0..hd {
            let r = sigmoid(gi[k] + gh[k]);
            let z = sigmoid(gi[hd + k] + gh[hd + k]);
            let n = (gi[2 * hd + k] + r * gh[2 * hd + k]).tanh();
            h[k] = (1.0 - z) * n + z * h[k];
        }
    }
}

/// Runs the GRU over a `[T, input_dim]` sequence from `h0`, returning every
/// hidden state as `[T, hidden_dim]`.
pub fn gru_forward(p: &GruParams, xs: &Tensor, h0: &[f32]) -> Result<Tensor> {
    xs.expect_rank(2, "gru input")?;
    if xs.shape()[1] != p.input_dim {
        return Err(shape_err!(
            "gru input width {} != input_dim {}",
            xs.shape()[1],
            p.input_dim
        ));
    }
    if h0.len() != p.hidden_dim {
        return Err(shape_err!(
            "gru h0 has {} entries, expected {}",
            h0.len(),
            p.hidden_dim
        ));
    }
    let t = xs.shape()[0];
    let hd = p.hidden_dim;
    let mut h = h0.to_vec();
    let mut scratch = vec![0.0f32; 6 * hd];
    let mut out = Vec::with_capacity(t * hd);
    for x in xs.data().chunks(p.input_dim.max(1)).take(t) {
        p.step(x, &mut h, &mut scratch);
        out.extend_from_slice(&h);
    }
    Tensor::from_vec(&[t, hd], out)
}
