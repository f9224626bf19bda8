//! Offline end-to-end processing: linear AEC, STFTs, network, synthesis.

use crate::error::{shape_err, Result};
use crate::laec::laec_process;
use crate::model::{smru_forward, Smru};
use crate::signal::{istft_with, stft_with, AudioBuffer, FrameTransform, StftConfig, HOP};

/// Enhanced output plus the linear canceller's signals.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessOutput {
    pub enhanced: AudioBuffer,
    /// Linear AEC residual `e`.
    pub residual: AudioBuffer,
    /// Linear echo estimate `y`.
    pub echo_estimate: AudioBuffer,
}

/// Enhances a microphone signal given the far-end reference.
///
/// Inputs are zero-padded to a whole number of hops; the output has the
/// input length. Output sample `n` depends only on input samples
/// `< n + 160` (one hop of STFT lookahead), matching the streaming runtime
/// delayed by one hop.
pub fn process(model: &Smru, mic: &AudioBuffer, far: &AudioBuffer) -> Result<AudioBuffer> {
    Ok(process_full(model, mic, far)?.enhanced)
}

pub fn process_full(model: &Smru, mic: &AudioBuffer, far: &AudioBuffer) -> Result<ProcessOutput> {
    if mic.len() != far.len() {
        return Err(shape_err!(
            "microphone has {} samples, far-end {}",
            mic.len(),
            far.len()
        ));
    }
    let n = mic.len();
    let padded = n.div_ceil(HOP) * HOP;
    let pad = |a: &AudioBuffer| {
        let mut v = a.samples().to_vec();
        v.resize(padded, 0.0);
        v
    };
    let (d, x) = (pad(mic), pad(far));
    let (e, y) = laec_process(&AudioBuffer::new(d.clone())?, &AudioBuffer::new(x.clone())?)?;
    let tf = FrameTransform::new(StftConfig::default());
    let mut enhanced = vec![0.0f32; padded];
    if tf.config().frames_for(padded) > 0 {
        let spec = |s: &[f32]| stft_with(&tf, s);
        let out = smru_forward(
            model,
            &spec(&d)?,
            &spec(&x)?,
            &spec(e.samples())?,
            &spec(y.samples())?,
        )?;
        let audio = istft_with(&tf, &out)?;
        enhanced[..audio.len()].copy_from_slice(audio.samples());
    }
    enhanced.truncate(n);
    let mut e = e.into_samples();
    let mut y = y.into_samples();
    e.truncate(n);
    y.truncate(n);
    Ok(ProcessOutput {
        enhanced: AudioBuffer::new(enhanced)?,
        residual: AudioBuffer::new(e)?,
        echo_estimate: AudioBuffer::new(y)?,
    })
}
