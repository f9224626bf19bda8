//! Frame-by-frame runtime.
//!
//! Each [`SmruStream::push`] takes one hop (160 samples) of microphone and
//! far-end audio and returns one hop of enhanced audio. Push `k` completes
//! STFT frame `k - 1` and emits output samples `[160(k-1), 160k)`; push 0
//! emits silence. [`SmruStream::flush`] drains the last half window. Hence
//! `pushes ++ flush == zeros(160) ++ pipeline::process(input)`.

pub mod checkpoint;

use std::sync::Arc;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::laec::{KalmanFilterState, LinearAec};
use crate::model::{ModelState, Smru};
use crate::signal::{FrameTransform, StftConfig, BINS, HOP, WINDOW_LEN};
use checkpoint::{CheckpointReader, CheckpointWriter};

/// Everything a stream carries between pushes.
#[derive(Clone, Debug)]
pub struct StreamState {
    aec: LinearAec,
    /// Previous hop of `d`, `x`, `e`, `y` (analysis history).
    history: [Vec<f32>; 4],
    /// Second half of the last synthesized frame.
    tail: Vec<f32>,
    model: ModelState,
    pushes: u64,
}

impl StreamState {
    pub fn new(model: &Smru) -> Self {
        Self {
            aec: LinearAec::default(),
            history: std::array::from_fn(|_| vec![0.0; HOP]),
            tail: vec![0.0; HOP],
            model: ModelState::new(model),
            pushes: 0,
        }
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn laec(&self) -> &KalmanFilterState {
        self.aec.state()
    }

    /// Scalar values held across pushes.
    pub fn footprint(&self) -> usize {
        self.aec.state().footprint()
            + self.history.iter().map(Vec::len).sum::<usize>()
            + self.tail.len()
            + self.model.footprint()
    }
}

/// A running enhancement stream sharing read-only weights.
#[derive(Clone, Debug)]
pub struct SmruStream {
    model: Arc<Smru>,
    transform: FrameTransform,
    state: StreamState,
}

impl SmruStream {
    pub fn new(model: Arc<Smru>) -> Self {
        Self {
            state: StreamState::new(&model),
            transform: FrameTransform::new(StftConfig::default()),
            model,
        }
    }

    pub fn model(&self) -> &Smru {
        &self.model
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn footprint(&self) -> usize {
        self.state.footprint()
    }

    /// Processes one hop; both slices must hold exactly 160 finite samples.
    pub fn push(&mut self, mic: &[f32], far: &[f32]) -> Result<Vec<f32>> {
        if mic.len() != HOP || far.len() != HOP {
            return Err(Error::Contract(format!(
                "push needs exactly {HOP} microphone and far-end samples, got {} and {}",
                mic.len(),
                far.len()
            )));
        }
        if !mic.iter().chain(far).all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite input sample".into()));
        }
        let st = &mut self.state;
        let mut e = vec![0.0f32; HOP];
        let mut y = vec![0.0f32; HOP];
        st.aec.step(mic, far, &mut e, &mut y)?;
        let current = [mic, far, e.as_slice(), y.as_slice()];
        let mut out = vec![0.0f32; HOP];
        if st.pushes > 0 {
            let mut rows: [Vec<Complex32>; 4] =
                std::array::from_fn(|_| vec![Complex32::new(0.0, 0.0); BINS]);
            let mut frame = vec![0.0f32; WINDOW_LEN];
            for c in 0..4 {
                frame[..HOP].copy_from_slice(&st.history[c]);
                frame[HOP..].copy_from_slice(current[c]);
                self.transform.analyze(&frame, &mut rows[c]);
            }
            let s = st
                .model
                .step(&self.model, &rows[0], &rows[1], &rows[2], &rows[3])?;
            self.transform.synthesize(&s, &mut frame);
            for i in 0..HOP {
                out[i] = st.tail[i] + frame[i];
                st.tail[i] = 0.0 + frame[HOP + i];
            }
        }
        for c in 0..4 {
            st.history[c].copy_from_slice(current[c]);
        }
        st.pushes += 1;
        Ok(out)
    }

    /// Emits the pending half window and clears it.
    pub fn flush(&mut self) -> Vec<f32> {
        std::mem::replace(&mut self.state.tail, vec![0.0; HOP])
    }

    /// Serializes the full stream state.
    pub fn checkpoint(&self) -> Vec<u8> {
        let st = &self.state;
        let mut w = CheckpointWriter::new(self.model.config().hash());
        w.u64s("stream.pushes", &[st.pushes]);
        for (name, h) in ["d", "x", "e", "y"].iter().zip(&st.history) {
            w.f32s(&format!("stream.history.{name}"), h);
        }
        w.f32s("stream.tail", &st.tail);
        st.aec.state().save(&mut w, "laec");
        st.model.save(&mut w);
        w.finish()
    }

    /// Rebuilds a stream from [`checkpoint`](Self::checkpoint) output.
    pub fn restore(model: Arc<Smru>, bytes: &[u8]) -> Result<Self> {
        let r = CheckpointReader::parse(bytes)?;
        if r.config_hash() != model.config().hash() {
            return Err(Error::Format(
                "checkpoint was written for a different model configuration".into(),
            ));
        }
        let history = [
            r.f32s("stream.history.d", HOP)?,
            r.f32s("stream.history.x", HOP)?,
            r.f32s("stream.history.e", HOP)?,
            r.f32s("stream.history.y", HOP)?,
        ];
        let state = StreamState {
            aec: LinearAec::from_state(KalmanFilterState::load(&r, "laec")?),
            history,
            tail: r.f32s("stream.tail", HOP)?,
            model: ModelState::load(&r, &model)?,
            pushes: r.u64s("stream.pushes", 1)?[0],
        };
        Ok(Self {
            state,
            transform: FrameTransform::new(StftConfig::default()),
            model,
        })
    }
}

/// Runs a whole signal through a fresh stream, returning the concatenated
/// pushes followed by the flush. Inputs are zero-padded to whole hops.
pub fn stream_process(model: Arc<Smru>, mic: &[f32], far: &[f32]) -> Result<Vec<f32>> {
    if mic.len() != far.len() {
        return Err(Error::Shape(format!(
            "microphone has {} samples, far-end {}",
            mic.len(),
            far.len()
        )));
    }
    let mut s = SmruStream::new(model);
    let hops = mic.len().div_ceil(HOP);
    let mut out = Vec::with_capacity((hops + 1) * HOP);
    let mut m = vec![0.0f32; HOP];
    let mut f = vec![0.0f32; HOP];
    for k in 0..hops {
        let r = k * HOP..((k + 1) * HOP).min(mic.len());
        m.fill(0.0);
        f.fill(0.0);
        m[..r.len()].copy_from_slice(&mic[r.clone()]);
        f[..r.len()].copy_from_slice(&far[r]);
        out.extend(s.push(&m, &f)?);
    }
    out.extend(s.flush());
    Ok(out)
}
