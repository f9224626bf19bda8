use num_complex::Complex32;

use super::config::{BandLayout, INPUT_CHANNELS};
use super::params::MergeBandParams;
use super::{FeatureMap, InputStack, MaskTensor};
use crate::error::{shape_err, Result};
use crate::signal::Spectrogram;
use crate::tensor::{layer_norm_into, Tensor};

/// Per-band MLPs mapping each band embedding to `8 * w_q` mask values,
/// concatenated along frequency into `[8, T, F]`.
pub fn band_merge(
    u: &FeatureMap,
    layout: &BandLayout,
    params: &[MergeBandParams],
) -> Result<MaskTensor> {
    let (e, t, q) = u.dims();
    if q != layout.bands() || params.len() != q {
        return Err(shape_err!(
            "band merge: {q} bands in, layout has {}, {} parameter sets",
            layout.bands(),
            params.len()
        ));
    }
    let f = layout.total_bins();
    let mut g = Tensor::zeros(&[INPUT_CHANNELS, t, f]);
    let mut normed = vec![0.0f32; e];
    let mut out = Vec::new();
    for (b, p) in params.iter().enumerate() {
        let w = layout.widths()[b];
        let off = layout.offset(b);
        if p.fc2.out_dim() != INPUT_CHANNELS * w || p.fc1.in_dim() != e {
            return Err(shape_err!(
                "band {b} merge parameters do not match width {w}"
            ));
        }
        let mut hidden = vec![0.0f32; p.fc1.out_dim()];
        out.resize(INPUT_CHANNELS * w, 0.0);
        for tt in 0..t {
            layer_norm_into(&p.norm, u.band(tt, b), &mut normed);
            p.fc1.apply(&normed, &mut hidden);
            hidden.iter_mut().for_each(|h| *h = h.tanh());
            p.fc2.apply(&hidden, &mut out);
            let gd = g.data_mut();
            for c in 0..INPUT_CHANNELS {
                let dst = (c * t + tt) * f + off;
                gd[dst..dst + w].copy_from_slice(&out[c * w..(c + 1) * w]);
            }
        }
    }
    MaskTensor::from_tensor(g)
}

/// Complex filter-and-sum: `S[t,f] = sum_c I_c[t,f] * G_c[t,f]` over the four
/// complex planes.
pub fn apply_mask(input: &InputStack, g: &MaskTensor) -> Result<Spectrogram> {
    if input.tensor().shape() != g.tensor().shape() {
        return Err(shape_err!(
            "mask {:?} does not match input {:?}",
            g.tensor().shape(),
            input.tensor().shape()
        ));
    }
    let (t, f) = (input.frames(), input.bins());
    let gd = g.tensor().data();
    let mut out = Vec::with_capacity(t * f);
    for tt in 0..t {
        for ff in 0..f {
            let mut acc = Complex32::new(0.0, 0.0);
            for c in 0..INPUT_CHANNELS / 2 {
                let m = Complex32::new(
                    gd[((2 * c) * t + tt) * f + ff],
                    gd[((2 * c + 1) * t + tt) * f + ff],
                );
                acc += input.complex(c, tt, ff) * m;
            }
            out.push(acc);
        }
    }
    Spectrogram::from_vec(t, f, out)
}
