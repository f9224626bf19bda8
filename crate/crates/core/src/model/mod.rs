//! The split-and-merge recurrent UNet.
//!
//! Offline entry point is [`smru_forward`]; [`ModelState`] runs the same
//! graph one frame at a time. Both paths share the per-frame kernels, so the
//! streaming output matches the offline output bit for bit.

mod config;
mod merge;
mod params;
mod postnet;
pub mod shapes;
mod split;
mod state;
mod vr;

use num_complex::Complex32;

use crate::error::{shape_err, Result};
use crate::signal::Spectrogram;
use crate::tensor::Tensor;
use crate::weights::WeightStore;

pub use config::{
    fnv1a64, BandLayout, ModelConfig, PostnetConfig, RegionConfig, INPUT_CHANNELS, PRESET_NAMES,
};
pub use merge::{apply_mask, band_merge};
pub use params::{
    parameter_specs, ConvParams, InterbandParams, LinearParams, MergeBandParams, ParamSpec,
    PostnetParams, SmruParams, SplitParams, VrBlockParams,
};
pub use postnet::{deep_filter, postnet_forward};
pub use split::{band_split, stem_conv};
pub use state::ModelState;
pub use vr::{
    block_input, interband_mlp, time_downsample, time_upsample, unet_forward, vr_block_forward,
};

/// Real and imaginary planes of the microphone, far-end, error and echo
/// spectra stacked as `[8, T, F]` in the order
/// `d_re, d_im, x_re, x_im, e_re, e_im, y_re, y_im`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputStack {
    planes: Tensor,
}

impl InputStack {
    pub fn new(d: &Spectrogram, x: &Spectrogram, e: &Spectrogram, y: &Spectrogram) -> Result<Self> {
        let sources = [d, x, e, y];
        if sources.iter().any(|s| !s.same_shape(d)) {
            return Err(shape_err!("input spectrograms must share (T, F)"));
        }
        let (t, f) = (d.frames(), d.bins());
        let mut planes = Tensor::zeros(&[INPUT_CHANNELS, t, f]);
        let data = planes.data_mut();
        for (c, s) in sources.iter().enumerate() {
            for (i, v) in s.data().iter().enumerate() {
                data[(2 * c) * t * f + i] = v.re;
                data[(2 * c + 1) * t * f + i] = v.im;
            }
        }
        Ok(Self { planes })
    }

    pub fn from_tensor(planes: Tensor) -> Result<Self> {
        planes.expect_rank(3, "input stack")?;
        if planes.shape()[0] != INPUT_CHANNELS {
            return Err(shape_err!(
                "input stack needs {INPUT_CHANNELS} channels, got {}",
                planes.shape()[0]
            ));
        }
        Ok(Self { planes })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.planes
    }

    pub fn frames(&self) -> usize {
        self.planes.shape()[1]
    }

    pub fn bins(&self) -> usize {
        self.planes.shape()[2]
    }

    /// Complex value of source `c` (0 = d, 1 = x, 2 = e, 3 = y).
    pub fn complex(&self, c: usize, t: usize, f: usize) -> Complex32 {
        let (tt, ff) = (self.frames(), self.bins());
        let d = self.planes.data();
        Complex32::new(
            d[(2 * c * tt + t) * ff + f],
            d[((2 * c + 1) * tt + t) * ff + f],
        )
    }
}

/// Band-domain features `[E, T, Q]`, stored frame-major (`[T][Q][E]`) so
/// that a frame, and a band within it, are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    embed: usize,
    frames: usize,
    bands: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(embed: usize, frames: usize, bands: usize) -> Self {
        Self {
            embed,
            frames,
            bands,
            data: vec![0.0; embed * frames * bands],
        }
    }

    pub fn from_frames(embed: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        let per = embed * bands;
        if per == 0 || !data.len().is_multiple_of(per) {
            return Err(shape_err!(
                "{} values do not form frames of {bands} bands x {embed}",
                data.len()
            ));
        }
        Ok(Self {
            embed,
            frames: data.len() / per,
            bands,
            data,
        })
    }

    /// Converts a channel-first `[E, T, Q]` tensor.
    pub fn from_channel_first(t: &Tensor) -> Result<Self> {
        t.expect_rank(3, "feature tensor")?;
        let (e, tt, q) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let mut out = Self::zeros(e, tt, q);
        for c in 0..e {
            for f in 0..tt {
                for b in 0..q {
                    out.data[(f * q + b) * e + c] = t.data()[(c * tt + f) * q + b];
                }
            }
        }
        Ok(out)
    }

    pub fn to_channel_first(&self) -> Tensor {
        let (e, tt, q) = (self.embed, self.frames, self.bands);
        let mut out = Tensor::zeros(&[e, tt, q]);
        for f in 0..tt {
            for b in 0..q {
                for c in 0..e {
                    out.data_mut()[(c * tt + f) * q + b] = self.data[(f * q + b) * e + c];
                }
            }
        }
        out
    }

    /// `(E, T, Q)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.embed, self.frames, self.bands)
    }

    pub fn embed(&self) -> usize {
        self.embed
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.embed * self.bands;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        let n = self.embed * self.bands;
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn band(&self, t: usize, q: usize) -> &[f32] {
        let i = (t * self.bands + q) * self.embed;
        &self.data[i..i + self.embed]
    }

    pub fn get(&self, e: usize, t: usize, q: usize) -> f32 {
        self.data[(t * self.bands + q) * self.embed + e]
    }
}

/// Complex masks `[8, T, F]` in the same channel order as [`InputStack`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaskTensor {
    planes: Tensor,
}

impl MaskTensor {
    pub fn from_tensor(planes: Tensor) -> Result<Self> {
        planes.expect_rank(3, "mask")?;
        if planes.shape()[0] != INPUT_CHANNELS {
            return Err(shape_err!("mask needs {INPUT_CHANNELS} channels"));
        }
        Ok(Self { planes })
    }

    pub fn tensor(&self) -> &Tensor {
        &self.planes
    }

    pub fn frames(&self) -> usize {
        self.planes.shape()[1]
    }

    pub fn bins(&self) -> usize {
        self.planes.shape()[2]
    }
}

/// Per-frame, per-bin complex taps `c[t][f][l]`, `l < order`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepFilterCoeffs {
    frames: usize,
    bins: usize,
    order: usize,
    data: Vec<Complex32>,
}

impl DeepFilterCoeffs {
    pub fn zeros(frames: usize, bins: usize, order: usize) -> Self {
        Self {
            frames,
            bins,
            order,
            data: vec![Complex32::new(0.0, 0.0); frames * bins * order],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn taps(&self, t: usize, f: usize) -> &[Complex32] {
        let i = (t * self.bins + f) * self.order;
        &self.data[i..i + self.order]
    }

    pub fn taps_mut(&mut self, t: usize, f: usize) -> &mut [Complex32] {
        let i = (t * self.bins + f) * self.order;
        &mut self.data[i..i + self.order]
    }

    pub(crate) fn frame_mut(&mut self, t: usize) -> &mut [Complex32] {
        let n = self.bins * self.order;
        &mut self.data[t * n..(t + 1) * n]
    }

    pub(crate) fn frame(&self, t: usize) -> &[Complex32] {
        let n = self.bins * self.order;
        &self.data[t * n..(t + 1) * n]
    }
}

/// Network plus its typed parameters.
#[derive(Clone, Debug)]
pub struct Smru {
    cfg: ModelConfig,
    layout: BandLayout,
    params: SmruParams,
}

impl Smru {
    pub fn new(cfg: ModelConfig, store: &WeightStore) -> Result<Self> {
        cfg.validate()?;
        let params = SmruParams::from_store(&cfg, store)?;
        Ok(Self {
            layout: cfg.band_layout(),
            cfg,
            params,
        })
    }

    /// Model with freshly seeded weights.
    pub fn seeded(cfg: ModelConfig, seed: u64) -> Result<Self> {
        let store = crate::weights::init_weights(&cfg, seed)?;
        Self::new(cfg, &store)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    pub fn params(&self) -> &SmruParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut SmruParams {
        &mut self.params
    }

    /// Drops the deep-filtering postnet; the output becomes the masked
    /// spectrum.
    pub fn without_postnet(mut self) -> Self {
        self.cfg.postnet.enabled = false;
        self.params.postnet = None;
        self
    }
}

/// Intermediate shapes recorded by [`smru_forward_traced`].
pub type ShapeTrace = Vec<(String, Vec<usize>)>;

/// Offline forward pass over four aligned spectrograms.
pub fn smru_forward(
    model: &Smru,
    d: &Spectrogram,
    x: &Spectrogram,
    e: &Spectrogram,
    y: &Spectrogram,
) -> Result<Spectrogram> {
    smru_forward_traced(model, d, x, e, y, None)
}

pub fn smru_forward_traced(
    model: &Smru,
    d: &Spectrogram,
    x: &Spectrogram,
    e: &Spectrogram,
    y: &Spectrogram,
    mut trace: Option<&mut ShapeTrace>,
) -> Result<Spectrogram> {
    let mut record = |name: &str, shape: Vec<usize>| {
        if let Some(t) = trace.as_deref_mut() {
            t.push((name.to_string(), shape));
        }
    };
    let cfg = &model.cfg;
    if d.bins() != cfg.bins() {
        return Err(shape_err!(
            "spectrogram has {} bins, model expects {}",
            d.bins(),
            cfg.bins()
        ));
    }
    let input = InputStack::new(d, x, e, y)?;
    record("input", input.tensor().shape().to_vec());
    let stem = stem_conv(&input, &model.params.split)?;
    record("stem", stem.shape().to_vec());
    let h = band_split(&stem, cfg, &model.params.split)?;
    record("split", fm_shape(&h));
    let mut block_trace = Vec::new();
    let u = vr::unet_forward_inner(&h, cfg, &model.params.blocks, Some(&mut block_trace))?;
    for (j, z) in block_trace.iter().enumerate() {
        record(&format!("block{}.down", j + 1), z.clone());
    }
    record("unet", fm_shape(&u));
    let g = band_merge(&u, &model.layout, &model.params.merge)?;
    record("mask", g.tensor().shape().to_vec());
    let s1 = apply_mask(&input, &g)?;
    record("masked", vec![s1.frames(), s1.bins()]);
    match (&cfg.postnet.enabled, &model.params.postnet) {
        (true, Some(pn)) => {
            let coeffs = postnet_forward(&s1, &u, pn)?;
            record(
                "df_coeffs",
                vec![coeffs.frames(), coeffs.bins(), coeffs.order()],
            );
            let out = deep_filter(&s1, &coeffs)?;
            record("output", vec![out.frames(), out.bins()]);
            Ok(out)
        }
        _ => {
            record("output", vec![s1.frames(), s1.bins()]);
            Ok(s1)
        }
    }
}

fn fm_shape(f: &FeatureMap) -> Vec<usize> {
    let (e, t, q) = f.dims();
    vec![e, t, q]
}
