use std::collections::VecDeque;

use num_complex::Complex32;

use super::postnet::{deep_filter_row, PostnetState};
use super::split::{band_split, stem_conv};
use super::vr::UnetState;
use super::{apply_mask, band_merge, FeatureMap, InputStack, Smru};
use crate::error::{shape_err, Error, Result};
use crate::signal::Spectrogram;
use crate::stream::checkpoint::{CheckpointReader, CheckpointWriter};

/// Frame-by-frame execution state of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    unet: UnetState,
    postnet: Option<PostnetState>,
    /// Masked spectra of the most recent frames, newest first.
    history: VecDeque<Vec<Complex32>>,
    frames: u64,
}

impl ModelState {
    pub fn new(model: &Smru) -> Self {
        let p = model.params();
        Self {
            unet: UnetState::new(model.config(), &p.blocks),
            postnet: p.postnet.as_ref().map(PostnetState::new),
            history: VecDeque::new(),
            frames: 0,
        }
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames
    }

    /// Number of scalar values held; independent of stream length.
    pub fn footprint(&self) -> usize {
        self.unet.footprint()
            + self.postnet.as_ref().map_or(0, PostnetState::footprint)
            + 2 * self.history.iter().map(Vec::len).sum::<usize>()
    }

    /// Enhances one frame given the four input spectrum rows.
    pub fn step(
        &mut self,
        model: &Smru,
        d: &[Complex32],
        x: &[Complex32],
        e: &[Complex32],
        y: &[Complex32],
    ) -> Result<Vec<Complex32>> {
        let cfg = model.config();
        let f = cfg.bins();
        if [d, x, e, y].iter().any(|r| r.len() != f) {
            return Err(shape_err!("every input row needs {f} bins"));
        }
        let row = |r: &[Complex32]| Spectrogram::from_vec(1, f, r.to_vec());
        let input = InputStack::new(&row(d)?, &row(x)?, &row(e)?, &row(y)?)?;
        let p = model.params();
        let stem = stem_conv(&input, &p.split)?;
        let h = band_split(&stem, cfg, &p.split)?;
        let mut u = FeatureMap::zeros(cfg.embed_dim, 1, cfg.bands());
        self.unet.step(&p.blocks, h.frame(0), u.frame_mut(0));
        let g = band_merge(&u, model.layout(), &p.merge)?;
        let s1 = apply_mask(&input, &g)?;
        self.frames += 1;
        let (Some(pn), Some(st)) = (p.postnet.as_ref(), self.postnet.as_mut()) else {
            return Ok(s1.row(0).to_vec());
        };
        let order = pn.df_order;
        let mut taps = vec![Complex32::new(0.0, 0.0); f * order];
        st.step(pn, s1.row(0), u.frame(0), &mut taps);
        let mut hist: Vec<Option<&[Complex32]>> = Vec::with_capacity(order);
        hist.push(Some(s1.row(0)));
        hist.extend((1..order).map(|l| self.history.get(l - 1).map(Vec::as_slice)));
        let mut out = vec![Complex32::new(0.0, 0.0); f];
        deep_filter_row(&taps, order, &hist, &mut out);
        if order > 1 {
            if self.history.len() == order - 1 {
                self.history.pop_back();
            }
            self.history.push_front(s1.row(0).to_vec());
        }
        Ok(out)
    }

    pub(crate) fn save(&self, w: &mut CheckpointWriter) {
        w.u64s("model.meta", &[self.frames, self.history.len() as u64]);
        self.unet.save(w);
        if let Some(st) = &self.postnet {
            st.save(w);
        }
        let flat: Vec<Complex32> = self.history.iter().flatten().copied().collect();
        w.complex("model.history", &flat);
    }

    pub(crate) fn load(r: &CheckpointReader, model: &Smru) -> Result<Self> {
        let cfg = model.config();
        let p = model.params();
        let meta = r.u64s("model.meta", 2)?;
        let depth = meta[1] as usize;
        let max_depth = p.postnet.as_ref().map_or(0, |pn| pn.df_order - 1);
        if depth > max_depth {
            return Err(Error::Format(format!(
                "checkpoint holds {depth} filter history rows, at most {max_depth} allowed"
            )));
        }
        let f = cfg.bins();
        let flat = r.complex("model.history", depth * f)?;
        Ok(Self {
            unet: UnetState::load(r, cfg, &p.blocks)?,
            postnet: p
                .postnet
                .as_ref()
                .map(|pn| PostnetState::load(r, pn))
                .transpose()?,
            history: flat.chunks(f).map(<[Complex32]>::to_vec).collect(),
            frames: meta[0],
        })
    }
}
