use super::Tensor;
use crate::error::{shape_err, Result};

/// `out = W x + b` for a single vector, `W` row-major `[out, in]`.
#[inline]
pub fn linear_into(weight: &[f32], bias: Option<&[f32]>, x: &[f32], out: &mut [f32]) {
    let n_in = x.len();
    debug_assert_eq!(weight.len(), n_in * out.len());
    for (o, y) in out.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        let mut acc = bias.map_or(0.0, |b| b[o]);
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        *y = acc;
    }
}

/// Affine map over the last axis of `x` (`[..., in]` to `[..., out]`).
pub fn linear(x: &Tensor, weight: &Tensor, bias: Option<&[f32]>) -> Result<Tensor> {
    weight.expect_rank(2, "linear weight")?;
    let (n_out, n_in) = (weight.shape()[0], weight.shape()[1]);
    if x.shape().is_empty() || x.last_dim() != n_in {
        return Err(shape_err!(
            "linear: input {:?} does not end in {n_in}",
            x.shape()
        ));
    }
    if let Some(b) = bias {
        if b.len() != n_out {
            return Err(shape_err!(
                "linear: bias has {} entries, expected {n_out}",
                b.len()
            ));
        }
    }
    let rows = x.len() / n_in;
    let mut out = vec![0.0f32; rows * n_out];
    for r in 0..rows {
        linear_into(
            weight.data(),
            bias,
            &x.data()[r * n_in..(r + 1) * n_in],
            &mut out[r * n_out..(r + 1) * n_out],
        );
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = n_out;
    Tensor::from_vec(&shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let x = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(linear(&x, &w, None).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let x = Tensor::from_vec(&[1, 2], vec![7., -3.]).unwrap();
        let w = Tensor::zeros(&[3, 2]);
        let y = linear(&x, &w, Some(&[0.5, -1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn dim_mismatch() {
        let x = Tensor::zeros(&[2, 4]);
        let w = Tensor::zeros(&[3, 3]);
        assert!(linear(&x, &w, None).is_err());
    }
}
