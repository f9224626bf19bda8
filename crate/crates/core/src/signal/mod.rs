//! Audio buffers, spectrograms and the causal STFT/iSTFT pair.

mod wav;

use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use crate::error::{shape_err, Error, Result};

pub use wav::{read_wav, write_wav};

pub const SAMPLE_RATE: u32 = 16_000;
pub const WINDOW_LEN: usize = 320;
pub const HOP: usize = 160;
pub const BINS: usize = WINDOW_LEN / 2 + 1;

/// Mono 16 kHz audio with finite samples.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
        }
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }
}

/// Complex `[T, F]` time-frequency representation, row-major by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex32>,
}

impl Spectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            frames,
            bins,
            data: vec![Complex32::new(0.0, 0.0); frames * bins],
        }
    }

    pub fn from_vec(frames: usize, bins: usize, data: Vec<Complex32>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(shape_err!(
                "spectrogram {frames}x{bins} needs {} values, got {}",
                frames * bins,
                data.len()
            ));
        }
        Ok(Self { frames, bins, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex32] {
        &mut self.data
    }

    pub fn row(&self, t: usize) -> &[Complex32] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [Complex32] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn get(&self, t: usize, f: usize) -> Complex32 {
        self.data[t * self.bins + f]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.frames == other.frames && self.bins == other.bins
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn push_row(&mut self, row: &[Complex32]) -> Result<()> {
        if row.len() != self.bins {
            return Err(shape_err!(
                "row has {} bins, expected {}",
                row.len(),
                self.bins
            ));
        }
        self.data.extend_from_slice(row);
        self.frames += 1;
        Ok(())
    }
}

/// Square-root periodic Hann window, `sin(pi n / N)`.
pub fn sqrt_hann(len: usize) -> Vec<f32> {
    (0..len)
        .map(|n| (std::f64::consts::PI * n as f64 / len as f64).sin() as f32)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: Vec<f32>,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: WINDOW_LEN,
            hop: HOP,
            window: sqrt_hann(WINDOW_LEN),
        }
    }
}

impl StftConfig {
    /// Square-root Hann analysis/synthesis pair at 50% overlap.
    pub fn new(window_len: usize, hop: usize) -> Result<Self> {
        if window_len == 0 || hop * 2 != window_len {
            return Err(Error::Config(format!(
                "hop ({hop}) must be half the window ({window_len})"
            )));
        }
        Ok(Self {
            window_len,
            hop,
            window: sqrt_hann(window_len),
        })
    }

    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// `1 + (len - window) / hop`, or 0 for inputs shorter than a window.
    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            1 + (len - self.window_len) / self.hop
        }
    }

    pub fn synthesis_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_len
        }
    }
}

/// Planned forward/inverse transforms for one windowed frame.
///
/// Offline and streaming processing both go through these two methods, which
/// keeps their outputs bit-identical.
#[derive(Clone)]
pub struct FrameTransform {
    cfg: StftConfig,
    forward: Arc<dyn Fft<f32>>,
    inverse: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for FrameTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameTransform")
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl FrameTransform {
    pub fn new(cfg: StftConfig) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(cfg.window_len);
        let inverse = planner.plan_fft_inverse(cfg.window_len);
        Self {
            cfg,
            forward,
            inverse,
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Windowed FFT of `frame` (window_len samples) into `out` (bins values).
    pub fn analyze(&self, frame: &[f32], out: &mut [Complex32]) {
        let n = self.cfg.window_len;
        let mut buf: Vec<Complex32> = frame
            .iter()
            .zip(&self.cfg.window)
            .map(|(x, w)| Complex32::new(x * w, 0.0))
            .collect();
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..n / 2 + 1]);
    }

    /// Inverse FFT of a one-sided row, scaled by `1/N` and windowed.
    pub fn synthesize(&self, row: &[Complex32], out: &mut [f32]) {
        let n = self.cfg.window_len;
        let half = n / 2;
        let mut buf = vec![Complex32::new(0.0, 0.0); n];
        buf[..=half].copy_from_slice(row);
        for k in 1..half {
            buf[n - k] = row[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f32;
        for ((o, c), w) in out.iter_mut().zip(&buf).zip(&self.cfg.window) {
            *o = c.re * scale * w;
        }
    }
}

/// Strictly causal STFT: frame `t` covers samples `[t*hop, t*hop + window)`.
pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    stft_with(&FrameTransform::new(cfg.clone()), audio.samples())
}

pub(crate) fn stft_with(tf: &FrameTransform, samples: &[f32]) -> Result<Spectrogram> {
    let cfg = tf.config();
    if samples.len() < cfg.window_len {
        return Err(Error::Length(format!(
            "need at least {} samples for one frame, got {}",
            cfg.window_len,
            samples.len()
        )));
    }
    let frames = cfg.frames_for(samples.len());
    let bins = cfg.bins();
    let mut spec = Spectrogram::zeros(frames, bins);
    for t in 0..frames {
        let start = t * cfg.hop;
        tf.analyze(&samples[start..start + cfg.window_len], spec.row_mut(t));
    }
    Ok(spec)
}

/// Overlap-add synthesis; output length is `(T-1)*hop + window`.
pub fn istft(spec: &Spectrogram, cfg: &StftConfig) -> Result<AudioBuffer> {
    istft_with(&FrameTransform::new(cfg.clone()), spec)
}

pub(crate) fn istft_with(tf: &FrameTransform, spec: &Spectrogram) -> Result<AudioBuffer> {
    let cfg = tf.config();
    if spec.bins() != cfg.bins() {
        return Err(shape_err!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            cfg.bins()
        ));
    }
    let mut out = vec![0.0f32; cfg.synthesis_len(spec.frames())];
    let mut frame = vec![0.0f32; cfg.window_len];
    for t in 0..spec.frames() {
        tf.synthesize(spec.row(t), &mut frame);
        let start = t * cfg.hop;
        for (o, v) in out[start..start + cfg.window_len].iter_mut().zip(&frame) {
            *o += v;
        }
    }
    AudioBuffer::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SplitMix64;

    fn noise(len: usize, seed: u64) -> AudioBuffer {
        let mut rng = SplitMix64::new(seed);
        AudioBuffer::new((0..len).map(|_| rng.symmetric(0.5)).collect()).unwrap()
    }

    #[test]
    fn one_second_frame_count() {
        let s = stft(&AudioBuffer::zeros(16_000), &StftConfig::default()).unwrap();
        assert_eq!((s.frames(), s.bins()), (99, 161));
    }

    #[test]
    fn short_input_is_length_error() {
        let r = stft(&AudioBuffer::zeros(319), &StftConfig::default());
        assert!(matches!(r, Err(Error::Length(_))));
    }

    #[test]
    fn dc_matches_window_transform() {
        // A constant signal's spectrum is the window's own DFT: bin 0 carries
        // the peak and the remaining bins follow the brute-force window DFT.
        let cfg = StftConfig::default();
        let s = stft(&AudioBuffer::new(vec![1.0; 640]).unwrap(), &cfg).unwrap();
        let n = cfg.window_len;
        for f in 0..cfg.bins() {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (i, w) in cfg.window.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (f * i) as f64 / n as f64;
                re += *w as f64 * ph.cos();
                im += *w as f64 * ph.sin();
            }
            let got = s.get(1, f);
            assert!((got.re as f64 - re).abs() < 1e-3 && (got.im as f64 - im).abs() < 1e-3);
        }
        let mags: Vec<f32> = s.row(0).iter().map(|c| c.norm()).collect();
        assert!(mags[1..].iter().all(|&m| m < mags[0] / 2.9));
    }

    #[test]
    fn tone_peaks_at_bin_20() {
        let x: Vec<f32> = (0..1600)
            .map(|n| (2.0 * std::f32::consts::PI * 1000.0 * n as f32 / 16_000.0).sin())
            .collect();
        let s = stft(&AudioBuffer::new(x).unwrap(), &StftConfig::default()).unwrap();
        let row = s.row(3);
        let peak = (0..161)
            .max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm()))
            .unwrap();
        assert_eq!(peak, 20);
    }

    #[test]
    fn round_trip_interior() {
        let cfg = StftConfig::default();
        let x = noise(16_000, 3);
        let y = istft(&stft(&x, &cfg).unwrap(), &cfg).unwrap();
        let (lo, hi) = (cfg.hop, y.len() - cfg.hop);
        let err: f64 = (lo..hi)
            .map(|i| (x.samples()[i] - y.samples()[i]) as f64)
            .map(|d| d * d)
            .sum();
        let norm: f64 = (lo..hi).map(|i| (x.samples()[i] as f64).powi(2)).sum();
        assert!((err / norm).sqrt() < 1e-5);
    }

    #[test]
    fn zero_spectrogram_gives_silence() {
        let cfg = StftConfig::default();
        let y = istft(&Spectrogram::zeros(5, 161), &cfg).unwrap();
        assert_eq!(y.len(), 4 * 160 + 320);
        assert!(y.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_synthesis_length() {
        let y = istft(&Spectrogram::zeros(1, 161), &StftConfig::default()).unwrap();
        assert_eq!(y.len(), 320);
    }

    #[test]
    fn bin_mismatch_is_shape_error() {
        let r = istft(&Spectrogram::zeros(2, 100), &StftConfig::default());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn hop_must_be_half_window() {
        assert!(StftConfig::new(320, 100).is_err());
        assert!(StftConfig::new(512, 256).is_ok());
    }

    #[test]
    fn window_is_cola_at_half_overlap() {
        let w = sqrt_hann(320);
        for n in 0..160 {
            let s = w[n] * w[n] + w[n + 160] * w[n + 160];
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn causal_framing() {
        let cfg = StftConfig::default();
        let x = noise(3200, 4);
        let base = stft(&x, &cfg).unwrap();
        let mut y = x.clone().into_samples();
        let s = 1234;
        y[s] += 0.25;
        let pert = stft(&AudioBuffer::new(y).unwrap(), &cfg).unwrap();
        for t in 0..base.frames() {
            let touches = t * cfg.hop <= s && s < t * cfg.hop + cfg.window_len;
            assert_eq!(base.row(t) != pert.row(t), touches, "frame {t}");
        }
    }
}
