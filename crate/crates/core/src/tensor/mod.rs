//! Dense f32 tensors and the handful of layers the model graph is built from.
//!
//! Every kernel computes each output element with a fixed accumulation order,
//! so applying a layer to a whole sequence or to a single frame yields
//! bit-identical values. The streaming runtime relies on this.

mod conv;
mod gru;
mod init;
mod linear;
mod norm;

pub use conv::{causal_conv1d_time, conv2d, Padding2d};
pub use gru::{gru_forward, GruParams};
pub use init::{seeded_init, seeded_uniform, Init, SplitMix64};
pub use linear::{linear, linear_into};
pub use norm::{layer_norm, layer_norm_into, LayerNormParams, LN_EPS};

use crate::error::{shape_err, Result};

/// Row-major `f32` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_err!(
                "shape {:?} needs {} values, got {}",
                shape,
                n,
                data.len()
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(shape_err!(
                "cannot reshape {:?} into {:?}",
                self.shape,
                shape
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Size of the last axis, 1 for scalars.
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub(crate) fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(shape_err!(
                "{what}: expected rank {rank}, got shape {:?}",
                self.shape
            ));
        }
        Ok(())
    }

    /// Copies the first `frames` entries of axis 1 of a `[C, T, ...]` tensor.
    pub fn truncate_axis1(&self, frames: usize) -> Result<Tensor> {
        if self.shape.len() < 2 || frames > self.shape[1] {
            return Err(shape_err!(
                "cannot truncate {:?} to {frames} frames",
                self.shape
            ));
        }
        let inner: usize = self.shape[2..].iter().product();
        let mut shape = self.shape.clone();
        shape[1] = frames;
        let mut data = Vec::with_capacity(self.shape[0] * frames * inner);
        for c in 0..self.shape[0] {
            let base = c * self.shape[1] * inner;
            data.extend_from_slice(&self.data[base..base + frames * inner]);
        }
        Tensor::from_vec(&shape, data)
    }
}
