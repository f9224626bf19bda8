//! Variable-frame-rate blocks and the recurrent UNet built from them.
//!
//! Everything here runs one full-rate frame at a time through
//! [`VrBlockState`]; the offline functions simply loop the same step.

use super::config::ModelConfig;
use super::params::{InterbandParams, LinearParams, VrBlockParams};
use super::FeatureMap;
use crate::error::{shape_err, Error, Result};
use crate::stream::checkpoint::{CheckpointReader, CheckpointWriter};
use crate::tensor::{causal_conv1d_time, layer_norm_into, LayerNormParams, Tensor};

#[inline]
fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn norm_bands(p: &LayerNormParams, x: &[f32], out: &mut [f32]) {
    let e = p.dim();
    for (src, dst) in x.chunks_exact(e).zip(out.chunks_exact_mut(e)) {
        layer_norm_into(p, src, dst);
    }
}

/// Non-overlapping causal downsampling by `lambda` over the merged `E*Q`
/// channel axis: `[E, T, Q]` to `[E, T / lambda, Q]`.
pub fn time_downsample(z: &FeatureMap, p: &VrBlockParams) -> Result<FeatureMap> {
    let (e, t, q) = z.dims();
    let c = e * q;
    if p.ds.weight.shape() != [c, 1, p.lambda] {
        return Err(shape_err!(
            "downsampling kernel {:?} does not fit {c} channels at ratio {}",
            p.ds.weight.shape(),
            p.lambda
        ));
    }
    let mut cm = vec![0.0f32; c * t];
    for tt in 0..t {
        for (ch, v) in z.frame(tt).iter().enumerate() {
            cm[ch * t + tt] = *v;
        }
    }
    let x = Tensor::from_vec(&[c, t], cm)?;
    let y = causal_conv1d_time(&x, &p.ds.weight, Some(&p.ds.bias), p.lambda, c)?;
    let t_out = y.shape()[1];
    let mut out = FeatureMap::zeros(e, t_out, q);
    for k in 0..t_out {
        for (ch, v) in out.frame_mut(k).iter_mut().enumerate() {
            *v = y.data()[ch * t_out + k];
        }
    }
    Ok(out)
}

/// Zero-order-hold upsampling back to `t_target` frames.
///
/// Output frame `t` is the pointwise image of compressed frame
/// `floor((t + 1) / lambda) - 1`, or `zero_history` before the first
/// compressed frame completes.
pub fn time_upsample(
    z: &FeatureMap,
    lambda: usize,
    t_target: usize,
    us: &LinearParams,
    zero_history: &[f32],
) -> Result<FeatureMap> {
    let (e, t_in, q) = z.dims();
    if lambda == 0 || t_in != t_target / lambda {
        return Err(shape_err!(
            "cannot upsample {t_in} frames by {lambda} to {t_target}"
        ));
    }
    if zero_history.len() != e * q || us.in_dim() != e || us.out_dim() != e {
        return Err(shape_err!(
            "upsampling parameters do not match E={e}, Q={q}"
        ));
    }
    let mut images = vec![0.0f32; t_in * e * q];
    for k in 0..t_in {
        us_frame(us, z.frame(k), &mut images[k * e * q..(k + 1) * e * q]);
    }
    let mut out = FeatureMap::zeros(e, t_target, q);
    for t in 0..t_target {
        let k = (t + 1) / lambda;
        let src = if k == 0 {
            zero_history
        } else {
            &images[(k - 1) * e * q..k * e * q]
        };
        out.frame_mut(t).copy_from_slice(src);
    }
    Ok(out)
}

fn us_frame(us: &LinearParams, z: &[f32], out: &mut [f32]) {
    let e = us.in_dim();
    for (src, dst) in z.chunks_exact(e).zip(out.chunks_exact_mut(e)) {
        us.apply(src, dst);
    }
}

/// Gated inter-band MLP on one frame `[Q][E]`.
pub(crate) fn interband_frame(p: &InterbandParams, z: &[f32], out: &mut [f32]) {
    let e = p.proj_out.out_dim();
    let q = z.len() / e;
    let mut u = vec![0.0f32; q * e];
    let mut v = vec![0.0f32; q * e];
    let mut a = vec![0.0f32; 2 * e];
    for b in 0..q {
        p.proj_in.apply(&z[b * e..(b + 1) * e], &mut a);
        a.iter_mut().for_each(|x| *x = gelu(*x));
        u[b * e..(b + 1) * e].copy_from_slice(&a[..e]);
        layer_norm_into(&p.gate_norm, &a[e..], &mut v[b * e..(b + 1) * e]);
    }
    let w = p.band_proj.weight.data();
    let mut g = vec![0.0f32; e];
    for b in 0..q {
        for (c, gc) in g.iter_mut().enumerate() {
            let mut acc = p.band_proj.bias[b];
            for b2 in 0..q {
                acc += w[b * q + b2] * v[b2 * e + c];
            }
            *gc = acc * u[b * e + c];
        }
        p.proj_out.apply(&g, &mut out[b * e..(b + 1) * e]);
    }
}

/// Per-frame inter-band modeling: channel projection to `2E`, GELU, split
/// into `(u, v)`, band projection of the normalized `v` across `Q`, gating
/// `u * proj(v)` and projection back to `E`.
pub fn interband_mlp(z: &FeatureMap, p: &InterbandParams) -> Result<FeatureMap> {
    let (e, t, q) = z.dims();
    if p.proj_in.in_dim() != e || p.band_proj.in_dim() != q {
        return Err(shape_err!(
            "inter-band parameters do not match E={e}, Q={q}"
        ));
    }
    let mut out = FeatureMap::zeros(e, t, q);
    for tt in 0..t {
        interband_frame(p, z.frame(tt), out.frame_mut(tt));
    }
    Ok(out)
}

/// Streaming state of one VR block.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct VrBlockState {
    /// Full-rate frames awaiting the next compressed frame, `[lambda][Q*E]`.
    pending: Vec<f32>,
    filled: usize,
    /// GRU hidden state per band.
    hidden: Vec<f32>,
    /// Upsampled output held until the next compressed frame completes.
    held: Vec<f32>,
}

impl VrBlockState {
    pub(crate) fn new(p: &VrBlockParams) -> Self {
        let n = p.zero_history.len();
        Self {
            pending: vec![0.0; p.lambda * n],
            filled: 0,
            hidden: vec![0.0; n],
            held: p.zero_history.clone(),
        }
    }

    pub(crate) fn footprint(&self) -> usize {
        self.pending.len() + self.hidden.len() + self.held.len()
    }

    /// Feeds one full-rate frame `[Q*E]` and writes the block output.
    pub(crate) fn step(&mut self, p: &VrBlockParams, z: &[f32], out: &mut [f32]) {
        let n = z.len();
        let lambda = p.lambda;
        self.pending[self.filled * n..(self.filled + 1) * n].copy_from_slice(z);
        self.filled += 1;
        if self.filled == lambda {
            self.filled = 0;
            self.compress(p, n);
        }
        out.copy_from_slice(&self.held);
    }

    fn compress(&mut self, p: &VrBlockParams, n: usize) {
        let lambda = p.lambda;
        let e = p.embed();
        let w = p.ds.weight.data();
        let mut zc = vec![0.0f32; n];
        for (ch, v) in zc.iter_mut().enumerate() {
            let mut acc = p.ds.bias[ch];
            for tau in 0..lambda {
                acc += w[ch * lambda + tau] * self.pending[tau * n + ch];
            }
            *v = acc;
        }
        let mut normed = vec![0.0f32; e];
        let mut scratch = vec![0.0f32; 6 * e];
        let mut fc = vec![0.0f32; e];
        let mut z1 = vec![0.0f32; n];
        for b in 0..n / e {
            let r = b * e..(b + 1) * e;
            layer_norm_into(&p.gru_norm, &zc[r.clone()], &mut normed);
            p.gru
                .step(&normed, &mut self.hidden[r.clone()], &mut scratch);
            p.fc.apply(&self.hidden[r.clone()], &mut fc);
            for (i, k) in r.enumerate() {
                z1[k] = fc[i] + zc[k];
            }
        }
        let mut z2 = vec![0.0f32; n];
        interband_frame(&p.mlp, &z1, &mut z2);
        for (a, b) in z2.iter_mut().zip(&z1) {
            *a += b;
        }
        us_frame(&p.us, &z2, &mut self.held);
    }

    pub(crate) fn save(&self, w: &mut CheckpointWriter, prefix: &str) {
        w.u64s(&format!("{prefix}.filled"), &[self.filled as u64]);
        w.f32s(&format!("{prefix}.pending"), &self.pending);
        w.f32s(&format!("{prefix}.hidden"), &self.hidden);
        w.f32s(&format!("{prefix}.held"), &self.held);
    }

    pub(crate) fn load(r: &CheckpointReader, prefix: &str, p: &VrBlockParams) -> Result<Self> {
        let n = p.zero_history.len();
        let filled = r.u64s(&format!("{prefix}.filled"), 1)?[0] as usize;
        if filled >= p.lambda {
            return Err(Error::Format(format!(
                "{prefix}: pending count {filled} out of range"
            )));
        }
        Ok(Self {
            pending: r.f32s(&format!("{prefix}.pending"), p.lambda * n)?,
            filled,
            hidden: r.f32s(&format!("{prefix}.hidden"), n)?,
            held: r.f32s(&format!("{prefix}.held"), n)?,
        })
    }
}

fn check_block(z: &FeatureMap, p: &VrBlockParams) -> Result<()> {
    let (e, _, q) = z.dims();
    if p.embed() != e || p.bands() != q {
        return Err(shape_err!(
            "block expects E={}, Q={}, got E={e}, Q={q}",
            p.embed(),
            p.bands()
        ));
    }
    Ok(())
}

/// One VR block: downsample, intra-band GRU with residual, inter-band MLP
/// with residual, upsample. Frame count is preserved.
pub fn vr_block_forward(z: &FeatureMap, p: &VrBlockParams) -> Result<FeatureMap> {
    check_block(z, p)?;
    let (e, t, q) = z.dims();
    let mut st = VrBlockState::new(p);
    let mut out = FeatureMap::zeros(e, t, q);
    for tt in 0..t {
        st.step(p, z.frame(tt), out.frame_mut(tt));
    }
    Ok(out)
}

/// Input of block `j = previous.len() + 1` for one frame.
pub(crate) fn block_input_frame(
    h: &[f32],
    previous: &[&[f32]],
    total_blocks: usize,
    dense: bool,
    norm: &LayerNormParams,
    out: &mut [f32],
) {
    let j = previous.len() + 1;
    let mut acc;
    if dense {
        acc = h.to_vec();
        for o in previous {
            for (a, v) in acc.iter_mut().zip(o.iter()) {
                *a += v;
            }
        }
    } else {
        acc = if j == 1 {
            h.to_vec()
        } else {
            previous[j - 2].to_vec()
        };
        let mirror = total_blocks + 1 - j;
        if mirror >= 1 && mirror < j - 1 {
            for (a, v) in acc.iter_mut().zip(previous[mirror - 1].iter()) {
                *a += v;
            }
        }
    }
    norm_bands(norm, &acc, out);
}

/// Normalized input of the next block given the split output `h` and the
/// outputs of all earlier blocks.
///
/// Dense mode sums `h` and every earlier output; plain mode takes the
/// previous output plus the mirrored encoder output in the decoder half.
pub fn block_input(
    h: &FeatureMap,
    previous: &[FeatureMap],
    total_blocks: usize,
    dense: bool,
    norm: &LayerNormParams,
) -> Result<FeatureMap> {
    if previous.iter().any(|o| o.dims() != h.dims()) {
        return Err(shape_err!(
            "block outputs must match the split output shape"
        ));
    }
    if previous.len() >= total_blocks {
        return Err(Error::Config(format!(
            "no block {} in a {total_blocks}-block network",
            previous.len() + 1
        )));
    }
    let (e, t, q) = h.dims();
    let mut out = FeatureMap::zeros(e, t, q);
    for tt in 0..t {
        let prev: Vec<&[f32]> = previous.iter().map(|o| o.frame(tt)).collect();
        block_input_frame(
            h.frame(tt),
            &prev,
            total_blocks,
            dense,
            norm,
            out.frame_mut(tt),
        );
    }
    Ok(out)
}

/// Streaming state of the whole UNet.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct UnetState {
    blocks: Vec<VrBlockState>,
    outputs: Vec<Vec<f32>>,
    input: Vec<f32>,
    dense: bool,
}

impl UnetState {
    pub(crate) fn new(cfg: &ModelConfig, params: &[VrBlockParams]) -> Self {
        let n = cfg.embed_dim * cfg.bands();
        Self {
            blocks: params.iter().map(VrBlockState::new).collect(),
            outputs: vec![vec![0.0; n]; params.len()],
            input: vec![0.0; n],
            dense: cfg.dense_skips,
        }
    }

    pub(crate) fn footprint(&self) -> usize {
        self.blocks
            .iter()
            .map(VrBlockState::footprint)
            .sum::<usize>()
            + self.outputs.iter().map(Vec::len).sum::<usize>()
            + self.input.len()
    }

    /// Runs every block on one frame of split output, writing `U`.
    pub(crate) fn step(&mut self, params: &[VrBlockParams], h: &[f32], out: &mut [f32]) {
        let nb = params.len();
        for j in 0..nb {
            {
                let prev: Vec<&[f32]> = self.outputs[..j].iter().map(Vec::as_slice).collect();
                block_input_frame(
                    h,
                    &prev,
                    nb,
                    self.dense,
                    &params[j].in_norm,
                    &mut self.input,
                );
            }
            self.blocks[j].step(&params[j], &self.input, &mut self.outputs[j]);
        }
        out.copy_from_slice(&self.outputs[nb - 1]);
    }

    pub(crate) fn save(&self, w: &mut CheckpointWriter) {
        for (j, b) in self.blocks.iter().enumerate() {
            b.save(w, &format!("unet.b{:02}", j + 1));
        }
    }

    pub(crate) fn load(
        r: &CheckpointReader,
        cfg: &ModelConfig,
        params: &[VrBlockParams],
    ) -> Result<Self> {
        let mut st = Self::new(cfg, params);
        for (j, p) in params.iter().enumerate() {
            st.blocks[j] = VrBlockState::load(r, &format!("unet.b{:02}", j + 1), p)?;
        }
        Ok(st)
    }
}

/// Runs the twelve VR blocks with normalized cross-scale sums; returns the
/// last block's output.
pub fn unet_forward(
    h: &FeatureMap,
    cfg: &ModelConfig,
    blocks: &[VrBlockParams],
) -> Result<FeatureMap> {
    unet_forward_inner(h, cfg, blocks, None)
}

pub(crate) fn unet_forward_inner(
    h: &FeatureMap,
    cfg: &ModelConfig,
    blocks: &[VrBlockParams],
    trace: Option<&mut Vec<Vec<usize>>>,
) -> Result<FeatureMap> {
    if blocks.len() != cfg.num_blocks || blocks.is_empty() {
        return Err(Error::Config(format!(
            "{} blocks supplied for a {}-block schedule",
            blocks.len(),
            cfg.num_blocks
        )));
    }
    for p in blocks {
        check_block(h, p)?;
    }
    let (e, t, q) = h.dims();
    if let Some(tr) = trace {
        tr.extend(blocks.iter().map(|p| vec![e, t / p.lambda, q]));
    }
    let mut st = UnetState::new(cfg, blocks);
    let mut out = FeatureMap::zeros(e, t, q);
    for tt in 0..t {
        st.step(blocks, h.frame(tt), out.frame_mut(tt));
    }
    Ok(out)
}
