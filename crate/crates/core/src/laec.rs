//! Linear echo canceller: partitioned-block frequency-domain Kalman filter.
//!
//! Overlap-save with blocks of one hop (160 samples) and 320-point FFTs.
//! The far-end spectrum history spans `K` partitions, each bin carrying its
//! own diagonal state model. Process noise follows from the forgetting
//! factor, observation noise from recursively smoothed `|E|^2`.

use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, HOP};
use crate::stream::checkpoint::{CheckpointReader, CheckpointWriter};

pub const PARTITIONS: usize = 20;
pub const FORGETTING: f32 = 0.999;
pub const NOISE_SMOOTHING: f32 = 0.99;
pub const FLOOR: f32 = 1e-10;
const INITIAL_STATE_VARIANCE: f32 = 1.0;
const INITIAL_NOISE: f32 = 1e-2;
/// Ratio of block length to FFT length in overlap-save.
const OVERLAP_RATIO: f32 = 0.5;

const BLOCK: usize = HOP;
const FFT_LEN: usize = 2 * BLOCK;
const BINS: usize = BLOCK + 1;

/// Adaptive state of one echo path. All spectra are `[partition][bin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanFilterState {
    partitions: usize,
    weights: Vec<Complex32>,
    /// State-error variance per partition and bin.
    p: Vec<f32>,
    /// Observation-noise estimate per bin.
    psi_s: Vec<f32>,
    /// Process-noise estimate per partition and bin.
    psi_d: Vec<f32>,
    /// Far-end spectra ring; partition `k` lives at `(head + k) % K`.
    far_spectra: Vec<Complex32>,
    head: usize,
    /// Last two far-end blocks (overlap-save input).
    far_time: Vec<f32>,
    blocks: u64,
}

impl KalmanFilterState {
    pub fn new(partitions: usize) -> Self {
        let n = partitions * BINS;
        Self {
            partitions,
            weights: vec![Complex32::new(0.0, 0.0); n],
            p: vec![INITIAL_STATE_VARIANCE; n],
            psi_s: vec![INITIAL_NOISE; BINS],
            psi_d: vec![0.0; n],
            far_spectra: vec![Complex32::new(0.0, 0.0); n],
            head: 0,
            far_time: vec![0.0; FFT_LEN],
            blocks: 0,
        }
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn blocks_processed(&self) -> u64 {
        self.blocks
    }

    pub fn weights(&self) -> &[Complex32] {
        &self.weights
    }

    pub fn state_variance(&self) -> &[f32] {
        &self.p
    }

    pub fn observation_noise(&self) -> &[f32] {
        &self.psi_s
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.re.is_finite() && w.im.is_finite())
            && self.p.iter().all(|v| v.is_finite())
            && self.psi_s.iter().all(|v| v.is_finite())
    }

    /// Number of scalar values held, a proxy for memory footprint.
    pub fn footprint(&self) -> usize {
        2 * self.weights.len()
            + self.p.len()
            + self.psi_s.len()
            + self.psi_d.len()
            + 2 * self.far_spectra.len()
            + self.far_time.len()
    }

    pub(crate) fn save(&self, w: &mut CheckpointWriter, prefix: &str) {
        w.u64s(
            &format!("{prefix}.meta"),
            &[self.partitions as u64, self.head as u64, self.blocks],
        );
        w.complex(&format!("{prefix}.weights"), &self.weights);
        w.f32s(&format!("{prefix}.p"), &self.p);
        w.f32s(&format!("{prefix}.psi_s"), &self.psi_s);
        w.f32s(&format!("{prefix}.psi_d"), &self.psi_d);
        w.complex(&format!("{prefix}.far_spectra"), &self.far_spectra);
        w.f32s(&format!("{prefix}.far_time"), &self.far_time);
    }

    pub(crate) fn load(r: &CheckpointReader, prefix: &str) -> Result<Self> {
        let meta = r.u64s(&format!("{prefix}.meta"), 3)?;
        let partitions = meta[0] as usize;
        let n = partitions * BINS;
        let state = Self {
            partitions,
            head: meta[1] as usize,
            blocks: meta[2],
            weights: r.complex(&format!("{prefix}.weights"), n)?,
            p: r.f32s(&format!("{prefix}.p"), n)?,
            psi_s: r.f32s(&format!("{prefix}.psi_s"), BINS)?,
            psi_d: r.f32s(&format!("{prefix}.psi_d"), n)?,
            far_spectra: r.complex(&format!("{prefix}.far_spectra"), n)?,
            far_time: r.f32s(&format!("{prefix}.far_time"), FFT_LEN)?,
        };
        if partitions == 0 || state.head >= partitions {
            return Err(Error::Format(format!(
                "{prefix}: invalid partition metadata"
            )));
        }
        Ok(state)
    }
}

/// Filter state plus FFT plans.
#[derive(Clone)]
pub struct LinearAec {
    state: KalmanFilterState,
    forward: Arc<dyn Fft<f32>>,
    inverse: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for LinearAec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearAec")
            .field("state", &self.state)
            .finish()
    }
}

impl Default for LinearAec {
    fn default() -> Self {
        Self::new(PARTITIONS)
    }
}

impl LinearAec {
    pub fn new(partitions: usize) -> Self {
        Self::from_state(KalmanFilterState::new(partitions))
    }

    pub fn from_state(state: KalmanFilterState) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            state,
            forward: planner.plan_fft_forward(FFT_LEN),
            inverse: planner.plan_fft_inverse(FFT_LEN),
        }
    }

    pub fn state(&self) -> &KalmanFilterState {
        &self.state
    }

    pub const fn block_len() -> usize {
        BLOCK
    }

    fn rfft(&self, time: &[f32], out: &mut [Complex32]) {
        let mut buf: Vec<Complex32> = time.iter().map(|&v| Complex32::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..BINS]);
    }

    fn irfft(&self, spec: &[Complex32], out: &mut [f32]) {
        let mut buf = vec![Complex32::new(0.0, 0.0); FFT_LEN];
        buf[..BINS].copy_from_slice(spec);
        for k in 1..BLOCK {
            buf[FFT_LEN - k] = spec[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / FFT_LEN as f32;
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re * scale;
        }
    }

    /// Processes one block of microphone `d` and far-end `x` samples,
    /// writing the error `e = d - y` and the echo estimate `y`.
    pub fn step(&mut self, d: &[f32], x: &[f32], e: &mut [f32], y: &mut [f32]) -> Result<()> {
        if d.len() != BLOCK || x.len() != BLOCK || e.len() != BLOCK || y.len() != BLOCK {
            return Err(Error::Shape(format!(
                "linear AEC works on blocks of {BLOCK} samples"
            )));
        }
        if d.iter().chain(x).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input to linear AEC".into()));
        }
        let k_parts = self.state.partitions;
        let a2 = FORGETTING * FORGETTING;

        // far-end history
        self.state.far_time.copy_within(BLOCK.., 0);
        self.state.far_time[BLOCK..].copy_from_slice(x);
        self.state.head = (self.state.head + k_parts - 1) % k_parts;
        let mut newest = vec![Complex32::new(0.0, 0.0); BINS];
        self.rfft(&self.state.far_time, &mut newest);
        let h = self.state.head;
        self.state.far_spectra[h * BINS..(h + 1) * BINS].copy_from_slice(&newest);

        // time update
        let st = &mut self.state;
        for i in 0..k_parts * BINS {
            st.weights[i] *= FORGETTING;
            st.psi_d[i] = (1.0 - a2) * st.weights[i].norm_sqr();
            st.p[i] = a2 * st.p[i] + st.psi_d[i];
        }

        // echo estimate (overlap-save keeps the second half)
        let mut echo = vec![Complex32::new(0.0, 0.0); BINS];
        for k in 0..k_parts {
            let slot = ((h + k) % k_parts) * BINS;
            let w = k * BINS;
            for f in 0..BINS {
                echo[f] += st.far_spectra[slot + f] * st.weights[w + f];
            }
        }
        let mut y_full = vec![0.0f32; FFT_LEN];
        self.irfft(&echo, &mut y_full);
        y.copy_from_slice(&y_full[BLOCK..]);
        for i in 0..BLOCK {
            e[i] = d[i] - y[i];
        }

        // measurement update
        let mut e_pad = vec![0.0f32; FFT_LEN];
        e_pad[BLOCK..].copy_from_slice(e);
        let mut err = vec![Complex32::new(0.0, 0.0); BINS];
        self.rfft(&e_pad, &mut err);

        let st = &self.state;
        let mut phi = st.psi_s.clone();
        for k in 0..k_parts {
            let slot = ((h + k) % k_parts) * BINS;
            for f in 0..BINS {
                phi[f] += st.far_spectra[slot + f].norm_sqr() * st.p[k * BINS + f];
            }
        }
        let mut delta = vec![Complex32::new(0.0, 0.0); BINS];
        let mut delta_time = vec![0.0f32; FFT_LEN];
        for k in 0..k_parts {
            let slot = ((h + k) % k_parts) * BINS;
            for f in 0..BINS {
                let xk = self.state.far_spectra[slot + f];
                let pk = self.state.p[k * BINS + f];
                delta[f] = xk.conj() * err[f] * (pk / phi[f]);
            }
            // gradient constraint: keep the causal half of the update
            self.irfft(&delta, &mut delta_time);
            delta_time[BLOCK..].fill(0.0);
            self.rfft(&delta_time, &mut delta);
            let st = &mut self.state;
            for f in 0..BINS {
                let i = k * BINS + f;
                st.weights[i] += delta[f];
                let x2 = st.far_spectra[slot + f].norm_sqr();
                let pk = st.p[i];
                st.p[i] = (pk - OVERLAP_RATIO * pk * x2 * pk / phi[f]).max(FLOOR);
            }
        }
        let st = &mut self.state;
        for f in 0..BINS {
            st.psi_s[f] = (NOISE_SMOOTHING * st.psi_s[f]
                + (1.0 - NOISE_SMOOTHING) * err[f].norm_sqr())
            .max(FLOOR);
        }
        st.blocks += 1;
        Ok(())
    }
}

/// One streaming step on a fresh or continuing filter; see [`LinearAec::step`].
pub fn laec_step(aec: &mut LinearAec, d: &[f32], x: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
    let mut e = vec![0.0; BLOCK];
    let mut y = vec![0.0; BLOCK];
    aec.step(d, x, &mut e, &mut y)?;
    Ok((e, y))
}

/// Runs a fresh filter over whole signals, returning `(e, y)`. The tail is
/// zero-padded to a whole block and trimmed back afterwards.
pub fn laec_process(d: &AudioBuffer, x: &AudioBuffer) -> Result<(AudioBuffer, AudioBuffer)> {
    laec_process_with(&mut LinearAec::default(), d, x)
}

pub fn laec_process_with(
    aec: &mut LinearAec,
    d: &AudioBuffer,
    x: &AudioBuffer,
) -> Result<(AudioBuffer, AudioBuffer)> {
    if d.len() != x.len() {
        return Err(Error::Shape(format!(
            "microphone has {} samples, far-end {}",
            d.len(),
            x.len()
        )));
    }
    let n = d.len();
    let padded = n.div_ceil(BLOCK) * BLOCK;
    let mut dp = d.samples().to_vec();
    let mut xp = x.samples().to_vec();
    dp.resize(padded, 0.0);
    xp.resize(padded, 0.0);
    let mut e = vec![0.0f32; padded];
    let mut y = vec![0.0f32; padded];
    for b in 0..padded / BLOCK {
        let r = b * BLOCK..(b + 1) * BLOCK;
        let (eb, yb) = (&mut e[r.clone()], &mut y[r.clone()]);
        aec.step(&dp[r.clone()], &xp[r], eb, yb)?;
    }
    e.truncate(n);
    y.truncate(n);
    Ok((AudioBuffer::new(e)?, AudioBuffer::new(y)?))
}
