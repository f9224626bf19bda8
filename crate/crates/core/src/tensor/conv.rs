use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Explicit zero padding for [`conv2d`], per side, in (time, frequency).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Padding2d {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding2d {
    pub fn right(right: usize) -> Self {
        Self {
            right,
            ..Self::default()
        }
    }
}

/// Grouped 2-D convolution over a `[C_in, T, F]` input with weights
/// `[C_out, C_in/groups, K_t, K_f]`.
///
/// Output length per axis is `(in + pad - kernel) / stride + 1`.
pub fn conv2d(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: (usize, usize),
    padding: Padding2d,
    groups: usize,
) -> Result<Tensor> {
    x.expect_rank(3, "conv2d input")?;
    weight.expect_rank(4, "conv2d weight")?;
    let (cin, t_in, f_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, cin_g, kt, kf) = (
        weight.shape()[0],
        weight.shape()[1],
        weight.shape()[2],
        weight.shape()[3],
    );
    if stride.0 == 0 || stride.1 == 0 {
        return Err(shape_err!("conv2d stride must be positive, got {stride:?}"));
    }
    if groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g {
        return Err(shape_err!(
            "conv2d groups={groups} inconsistent with C_in={cin}, C_out={cout}, weight {:?}",
            weight.shape()
        ));
    }
    if let Some(b) = bias {
        if b.len() != cout {
            return Err(shape_err!(
                "conv2d bias has {} entries, expected {cout}",
                b.len()
            ));
        }
    }
    let t_pad = t_in + padding.top + padding.bottom;
    let f_pad = f_in + padding.left + padding.right;
    if kt == 0 || kf == 0 || kt > t_pad || kf > f_pad {
        return Err(shape_err!(
            "conv2d kernel ({kt},{kf}) larger than padded input ({t_pad},{f_pad})"
        ));
    }
    let t_out = (t_pad - kt) / stride.0 + 1;
    let f_out = (f_pad - kf) / stride.1 + 1;
    let cout_g = cout / groups;
    let xd = x.data();
    let wd = weight.data();
    let mut out = vec![0.0f32; cout * t_out * f_out];
    for co in 0..cout {
        let g = co / cout_g;
        let b = bias.map_or(0.0, |b| b[co]);
        for ot in 0..t_out {
            for of in 0..f_out {
                let mut acc = b;
                for ci in 0..cin_g {
                    let c = g * cin_g + ci;
                    for dt in 0..kt {
                        let ti = (ot * stride.0 + dt) as isize - padding.top as isize;
                        if ti < 0 || ti >= t_in as isize {
                            continue;
                        }
                        let xrow = (c * t_in + ti as usize) * f_in;
                        let wrow = ((co * cin_g + ci) * kt + dt) * kf;
                        for df in 0..kf {
                            let fi = (of * stride.1 + df) as isize - padding.left as isize;
                            if fi < 0 || fi >= f_in as isize {
                                continue;
                            }
                            acc += wd[wrow + df] * xd[xrow + fi as usize];
                        }
                    }
                }
                out[(co * t_out + ot) * f_out + of] = acc;
            }
        }
    }
    Tensor::from_vec(&[cout, t_out, f_out], out)
}

/// Non-overlapping causal convolution along time on a `[C_in, T]` input with
/// weights `[C_out, C_in/groups, k]`; `k` must equal `stride`.
///
/// Output frame `j` reads input frames `j*stride .. j*stride + k`, so
/// `T' = T / stride` and trailing frames that do not complete a window are
/// dropped.
pub fn causal_conv1d_time(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    groups: usize,
) -> Result<Tensor> {
    x.expect_rank(2, "causal_conv1d_time input")?;
    weight.expect_rank(3, "causal_conv1d_time weight")?;
    let (cin, t_in) = (x.shape()[0], x.shape()[1]);
    let (cout, cin_g, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
    if stride == 0 {
        return Err(shape_err!("causal_conv1d_time stride must be positive"));
    }
    if k != stride {
        return Err(Error::Config(format!(
            "causal time downsampling needs kernel == stride, got kernel {k}, stride {stride}"
        )));
    }
    if groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g {
        return Err(shape_err!(
            "causal_conv1d_time groups={groups} inconsistent with C_in={cin}, C_out={cout}"
        ));
    }
    if let Some(b) = bias {
        if b.len() != cout {
            return Err(shape_err!("bias has {} entries, expected {cout}", b.len()));
        }
    }
    let t_out = t_in / stride;
    let cout_g = cout / groups;
    let xd = x.data();
    let wd = weight.data();
    let mut out = vec![0.0f32; cout * t_out];
    for co in 0..cout {
        let g = co / cout_g;
        let b = bias.map_or(0.0, |b| b[co]);
        for j in 0..t_out {
            let mut acc = b;
            for ci in 0..cin_g {
                let c = g * cin_g + ci;
                let xrow = c * t_in + j * stride;
                let wrow = (co * cin_g + ci) * k;
                for tau in 0..k {
                    acc += wd[wrow + tau] * xd[xrow + tau];
                }
            }
            out[co * t_out + j] = acc;
        }
    }
    Tensor::from_vec(&[cout, t_out], out)
}
