use num_complex::Complex32;

use super::params::PostnetParams;
use super::{DeepFilterCoeffs, FeatureMap};
use crate::error::{shape_err, Error, Result};
use crate::signal::Spectrogram;
use crate::stream::checkpoint::{CheckpointReader, CheckpointWriter};

/// Recurrent state of the postnet.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PostnetState {
    hidden: Vec<Vec<f32>>,
}

impl PostnetState {
    pub(crate) fn new(p: &PostnetParams) -> Self {
        Self {
            hidden: vec![vec![0.0; p.hidden()]; p.grus.len()],
        }
    }

    pub(crate) fn footprint(&self) -> usize {
        self.hidden.iter().map(Vec::len).sum()
    }

    /// Taps for one frame from the masked spectrum row and the UNet features.
    pub(crate) fn step(
        &mut self,
        p: &PostnetParams,
        row: &[Complex32],
        features: &[f32],
        taps: &mut [Complex32],
    ) {
        let hd = p.hidden();
        let mut input = Vec::with_capacity(row.len() + features.len());
        input.extend(row.iter().map(|v| v.norm().ln_1p()));
        input.extend_from_slice(features);
        let mut x = vec![0.0f32; hd];
        p.proj_in.apply(&input, &mut x);
        let mut scratch = vec![0.0f32; 6 * hd];
        for (gru, h) in p.grus.iter().zip(&mut self.hidden) {
            gru.step(&x, h, &mut scratch);
            x.copy_from_slice(h);
        }
        let gw = hd / p.out_groups.len();
        let mut raw = Vec::with_capacity(2 * taps.len());
        for (g, lin) in p.out_groups.iter().enumerate() {
            let start = raw.len();
            raw.resize(start + lin.out_dim(), 0.0);
            lin.apply(&x[g * gw..(g + 1) * gw], &mut raw[start..]);
        }
        for (i, t) in taps.iter_mut().enumerate() {
            *t = Complex32::new(raw[2 * i], raw[2 * i + 1]);
        }
    }

    pub(crate) fn save(&self, w: &mut CheckpointWriter) {
        for (l, h) in self.hidden.iter().enumerate() {
            w.f32s(&format!("postnet.gru{l}"), h);
        }
    }

    pub(crate) fn load(r: &CheckpointReader, p: &PostnetParams) -> Result<Self> {
        Ok(Self {
            hidden: (0..p.grus.len())
                .map(|l| r.f32s(&format!("postnet.gru{l}"), p.hidden()))
                .collect::<Result<_>>()?,
        })
    }
}

/// Deep-filter taps per frame from `log(1 + |S|)` of the masked spectrum and
/// the UNet output: input projection, stacked GRUs, grouped linear output.
/// Output value `(f * L + l) * 2 + {0: re, 1: im}` is tap `l` of bin `f`.
pub fn postnet_forward(
    s1: &Spectrogram,
    u: &FeatureMap,
    p: &PostnetParams,
) -> Result<DeepFilterCoeffs> {
    if s1.bins() != p.bins || s1.frames() != u.frames() {
        return Err(shape_err!(
            "postnet input ({}, {}) does not match features with {} frames",
            s1.frames(),
            s1.bins(),
            u.frames()
        ));
    }
    if p.proj_in.in_dim() != p.bins + u.embed() * u.bands() {
        return Err(shape_err!(
            "postnet input projection does not match features"
        ));
    }
    let mut coeffs = DeepFilterCoeffs::zeros(s1.frames(), s1.bins(), p.df_order);
    let mut st = PostnetState::new(p);
    for t in 0..s1.frames() {
        st.step(p, s1.row(t), u.frame(t), coeffs.frame_mut(t));
    }
    Ok(coeffs)
}

/// One output row: `sum_l c[f][l] * history[l][f]`, where `history[l]` is
/// the row `l` frames back (`None` before the signal start).
pub(crate) fn deep_filter_row(
    taps: &[Complex32],
    order: usize,
    history: &[Option<&[Complex32]>],
    out: &mut [Complex32],
) {
    for (f, o) in out.iter_mut().enumerate() {
        let c = &taps[f * order..(f + 1) * order];
        let mut acc = Complex32::new(0.0, 0.0);
        for (l, h) in history.iter().enumerate().take(order) {
            if let Some(row) = h {
                acc += c[l] * row[f];
            }
        }
        *o = acc;
    }
}

/// Causal per-bin complex FIR across frames with per-frame taps.
pub fn deep_filter(s1: &Spectrogram, c: &DeepFilterCoeffs) -> Result<Spectrogram> {
    if c.order() == 0 {
        return Err(Error::Config("deep filter order must be >= 1".into()));
    }
    if c.frames() != s1.frames() || c.bins() != s1.bins() {
        return Err(shape_err!(
            "coefficients ({}, {}) do not match spectrum ({}, {})",
            c.frames(),
            c.bins(),
            s1.frames(),
            s1.bins()
        ));
    }
    let mut out = Spectrogram::zeros(s1.frames(), s1.bins());
    let mut hist = Vec::with_capacity(c.order());
    for t in 0..s1.frames() {
        hist.clear();
        hist.extend((0..c.order()).map(|l| (t >= l).then(|| s1.row(t - l))));
        deep_filter_row(c.frame(t), c.order(), &hist, out.row_mut(t));
    }
    Ok(out)
}
