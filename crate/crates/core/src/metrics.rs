//! Training losses (as diagnostics) and objective metrics.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::signal::{AudioBuffer, Spectrogram, HOP, WINDOW_LEN};

/// Per-frame activity flags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VadLabels(pub Vec<bool>);

impl VadLabels {
    pub fn all(active: bool, frames: usize) -> Self {
        Self(vec![active; frames])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.0[t]
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta: f64,
    pub echo_weight: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 0.0002,
            echo_weight: 0.1,
            epsilon: 0.1,
        }
    }
}

impl LossWeights {
    pub fn with_beta(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            ..Self::default()
        })
    }
}

fn check_same(a: &Spectrogram, b: &Spectrogram) -> Result<()> {
    if !a.same_shape(b) {
        return Err(shape_err!(
            "spectrograms differ in shape: ({}, {}) vs ({}, {})",
            a.frames(),
            a.bins(),
            b.frames(),
            b.bins()
        ));
    }
    Ok(())
}

fn mae_over(est: &Spectrogram, target: &Spectrogram, frames: impl Iterator<Item = usize>) -> f64 {
    let (mut re, mut im, mut mag) = (0.0f64, 0.0f64, 0.0f64);
    let mut n = 0usize;
    for t in frames {
        for (a, b) in est.row(t).iter().zip(target.row(t)) {
            re += (a.re as f64 - b.re as f64).abs();
            im += (a.im as f64 - b.im as f64).abs();
            mag += (a.norm() as f64 - b.norm() as f64).abs();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (re + im + mag) / n as f64
    }
}

/// Mean absolute error of real parts, imaginary parts and magnitudes.
pub fn mae_loss(est: &Spectrogram, target: &Spectrogram) -> Result<f64> {
    check_same(est, target)?;
    Ok(mae_over(est, target, 0..est.frames()))
}

/// `10 log10(||S_hat over inactive frames||^2 + eps)`.
pub fn vad_loss(est: &Spectrogram, labels: &VadLabels, epsilon: f64) -> Result<f64> {
    if labels.len() != est.frames() {
        return Err(shape_err!(
            "{} labels for {} frames",
            labels.len(),
            est.frames()
        ));
    }
    let mut energy = 0.0f64;
    for t in (0..est.frames()).filter(|&t| !labels.is_active(t)) {
        energy += est.row(t).iter().map(|v| v.norm_sqr() as f64).sum::<f64>();
    }
    Ok(10.0 * (energy + epsilon).log10())
}

/// Echo-aware loss term; implementations are interchangeable.
pub trait EchoLoss {
    fn echo_loss(
        &self,
        est: &Spectrogram,
        target: &Spectrogram,
        echo_active: &VadLabels,
    ) -> Result<f64>;
}

/// MAE restricted to echo-active frames.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaskedMae;

impl EchoLoss for MaskedMae {
    fn echo_loss(
        &self,
        est: &Spectrogram,
        target: &Spectrogram,
        echo_active: &VadLabels,
    ) -> Result<f64> {
        check_same(est, target)?;
        if echo_active.len() != est.frames() {
            return Err(shape_err!(
                "{} echo labels for {} frames",
                echo_active.len(),
                est.frames()
            ));
        }
        Ok(mae_over(
            est,
            target,
            (0..est.frames()).filter(|&t| echo_active.is_active(t)),
        ))
    }
}

pub fn echo_loss(est: &Spectrogram, target: &Spectrogram, echo_active: &VadLabels) -> Result<f64> {
    MaskedMae.echo_loss(est, target, echo_active)
}

/// Individual loss terms and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub mae: f64,
    pub echo: f64,
    pub vad: f64,
    pub total: f64,
}

impl LossTerms {
    pub fn compute(
        est: &Spectrogram,
        target: &Spectrogram,
        labels: &VadLabels,
        echo_active: &VadLabels,
        w: &LossWeights,
        echo: &dyn EchoLoss,
    ) -> Result<Self> {
        let mae = mae_loss(est, target)?;
        let echo = echo.echo_loss(est, target, echo_active)?;
        let vad = vad_loss(est, labels, w.epsilon)?;
        Ok(Self {
            mae,
            echo,
            vad,
            total: mae + w.echo_weight * echo + w.beta * vad,
        })
    }
}

/// `L_MAE + 0.1 L_echo + beta L_vad`.
pub fn total_loss(
    est: &Spectrogram,
    target: &Spectrogram,
    labels: &VadLabels,
    echo_active: &VadLabels,
    w: &LossWeights,
) -> Result<f64> {
    Ok(LossTerms::compute(est, target, labels, echo_active, w, &MaskedMae)?.total)
}

/// Framing and threshold of the energy-based activity detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VadConfig {
    pub window: usize,
    pub hop: usize,
    /// Activity threshold relative to the loudest frame, in dB.
    pub threshold_db: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            window: WINDOW_LEN,
            hop: HOP,
            threshold_db: -40.0,
        }
    }
}

/// Mean square of each analysis frame (`[t*hop, t*hop + window)`).
pub fn frame_powers(samples: &[f32], cfg: &VadConfig) -> Vec<f64> {
    if samples.len() < cfg.window {
        return Vec::new();
    }
    (0..=(samples.len() - cfg.window) / cfg.hop)
        .map(|t| {
            let f = &samples[t * cfg.hop..t * cfg.hop + cfg.window];
            f.iter().map(|&v| v as f64 * v as f64).sum::<f64>() / cfg.window as f64
        })
        .collect()
}

/// A frame is active iff its RMS exceeds the peak frame RMS minus 40 dB.
pub fn vad_from_signal(near_end: &AudioBuffer, cfg: &VadConfig) -> VadLabels {
    vad_from_samples(near_end.samples(), cfg)
}

pub(crate) fn vad_from_samples(samples: &[f32], cfg: &VadConfig) -> VadLabels {
    let powers = frame_powers(samples, cfg);
    let peak = powers.iter().copied().fold(0.0f64, f64::max);
    let gate = peak * 10f64.powf(cfg.threshold_db / 10.0);
    VadLabels(powers.iter().map(|&p| peak > 0.0 && p > gate).collect())
}

/// Mean square over frames flagged active by the relative gate; 0 for
/// silence.
pub fn active_power(samples: &[f32], cfg: &VadConfig) -> f64 {
    let powers = frame_powers(samples, cfg);
    let labels = vad_from_samples(samples, cfg);
    let n = labels.active_count();
    if n == 0 {
        return 0.0;
    }
    powers
        .iter()
        .zip(&labels.0)
        .filter(|(_, &a)| a)
        .map(|(p, _)| p)
        .sum::<f64>()
        / n as f64
}

pub const SI_SNR_CAP_DB: f64 = 80.0;

/// Scale-invariant SNR in dB, capped at 80 dB.
pub fn si_snr(estimate: &AudioBuffer, target: &AudioBuffer) -> Result<f64> {
    if estimate.len() != target.len() {
        return Err(shape_err!(
            "estimate has {} samples, target {}",
            estimate.len(),
            target.len()
        ));
    }
    let centered = |a: &AudioBuffer| {
        let mean = a.samples().iter().map(|&v| v as f64).sum::<f64>() / a.len().max(1) as f64;
        a.samples()
            .iter()
            .map(|&v| v as f64 - mean)
            .collect::<Vec<f64>>()
    };
    let (est, tgt) = (centered(estimate), centered(target));
    let tt: f64 = tgt.iter().map(|v| v * v).sum();
    if tt <= 0.0 {
        return Err(Error::Numeric("SI-SNR undefined for a zero target".into()));
    }
    let dot: f64 = est.iter().zip(&tgt).map(|(a, b)| a * b).sum();
    let alpha = dot / tt;
    let (mut sig, mut noise) = (0.0f64, 0.0f64);
    for (e, t) in est.iter().zip(&tgt) {
        let p = alpha * t;
        sig += p * p;
        noise += (e - p) * (e - p);
    }
    if noise <= 0.0 {
        return Ok(SI_SNR_CAP_DB);
    }
    Ok((10.0 * (sig / noise).log10()).min(SI_SNR_CAP_DB))
}

fn mean_square(x: &[f32]) -> f64 {
    x.iter().map(|&v| v as f64 * v as f64).sum::<f64>() / x.len().max(1) as f64
}

/// `10 log10(mean(mic^2) / mean(out^2))`.
pub fn erle(mic: &AudioBuffer, out: &AudioBuffer) -> Result<f64> {
    erle_samples(mic.samples(), out.samples())
}

pub fn erle_samples(mic: &[f32], out: &[f32]) -> Result<f64> {
    if mic.len() != out.len() {
        return Err(shape_err!(
            "mic has {} samples, output {}",
            mic.len(),
            out.len()
        ));
    }
    let (pm, po) = (mean_square(mic), mean_square(out));
    if pm <= 0.0 || po <= 0.0 {
        return Err(Error::Numeric("ERLE undefined for a silent signal".into()));
    }
    Ok(10.0 * (pm / po).log10())
}

/// Mean of ERLE values over consecutive non-overlapping windows.
pub fn windowed_erle(mic: &AudioBuffer, out: &AudioBuffer, window: usize) -> Result<f64> {
    if mic.len() != out.len() {
        return Err(shape_err!(
            "mic has {} samples, output {}",
            mic.len(),
            out.len()
        ));
    }
    if window == 0 || mic.len() < window {
        return Err(Error::Length(format!(
            "need at least one window of {window} samples"
        )));
    }
    let vals = mic
        .samples()
        .chunks_exact(window)
        .zip(out.samples().chunks_exact(window))
        .map(|(m, o)| erle_samples(m, o))
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// JSON record of one processed scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scenario: String,
    pub samples: usize,
    pub si_snr_db: Option<f64>,
    pub erle_db: Option<f64>,
    pub losses: Option<LossTerms>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex32;

    fn spec_fill(t: usize, f: usize, v: Complex32) -> Spectrogram {
        Spectrogram::from_vec(t, f, vec![v; t * f]).unwrap()
    }

    #[test]
    fn mae_unit_values() {
        let s = spec_fill(3, 161, Complex32::new(0.3, -0.1));
        assert_eq!(mae_loss(&s, &s).unwrap(), 0.0);
        let z = Spectrogram::zeros(3, 161);
        let one = spec_fill(3, 161, Complex32::new(1.0, 0.0));
        assert!((mae_loss(&one, &z).unwrap() - 2.0).abs() < 1e-12);
        assert!(mae_loss(&one, &Spectrogram::zeros(2, 161)).is_err());
    }

    #[test]
    fn vad_loss_unit_values() {
        let z = Spectrogram::zeros(4, 161);
        assert_eq!(vad_loss(&z, &VadLabels::all(false, 4), 0.1).unwrap(), -10.0);
        let one = spec_fill(4, 161, Complex32::new(1.0, 0.0));
        assert_eq!(
            vad_loss(&one, &VadLabels::all(true, 4), 0.1).unwrap(),
            -10.0
        );
        let labels = VadLabels(vec![true, false, true, true]);
        let got = vad_loss(&one, &labels, 0.1).unwrap();
        assert!((got - 10.0 * (161.1f64).log10()).abs() < 1e-9);
    }

    #[test]
    fn echo_loss_restricts_frames() {
        let z = Spectrogram::zeros(3, 161);
        let one = spec_fill(3, 161, Complex32::new(1.0, 0.0));
        assert_eq!(echo_loss(&one, &z, &VadLabels::all(false, 3)).unwrap(), 0.0);
        assert_eq!(
            echo_loss(&one, &one, &VadLabels::all(true, 3)).unwrap(),
            0.0
        );
        let mut est = z.clone();
        est.row_mut(1)
            .iter_mut()
            .for_each(|v| *v = Complex32::new(0.0, 2.0));
        let l = echo_loss(&est, &z, &VadLabels(vec![false, true, false])).unwrap();
        assert!((l - 4.0).abs() < 1e-12);
    }

    #[test]
    fn total_loss_with_zero_inputs() {
        let z = Spectrogram::zeros(2, 161);
        let labels = VadLabels::all(false, 2);
        for beta in [0.0, 0.0002, 1.0] {
            let w = LossWeights::with_beta(beta).unwrap();
            let l = total_loss(&z, &z, &labels, &labels, &w).unwrap();
            assert!((l + 10.0 * beta).abs() < 1e-12);
        }
        assert!(LossWeights::with_beta(-1.0).is_err());
        assert_eq!(LossWeights::default().beta, 0.0002);
    }

    #[test]
    fn vad_silence_and_tone() {
        let cfg = VadConfig::default();
        let silent = vad_from_signal(&AudioBuffer::zeros(3200), &cfg);
        assert_eq!(silent.active_count(), 0);
        let tone: Vec<f32> = (0..3200).map(|n| (n as f32 * 0.3).sin()).collect();
        let labels = vad_from_signal(&AudioBuffer::new(tone).unwrap(), &cfg);
        assert_eq!(labels.active_count(), labels.len());
    }

    #[test]
    fn vad_threshold_boundary() {
        let cfg = VadConfig {
            window: 160,
            hop: 160,
            threshold_db: -40.0,
        };
        // Frames at 0 dB, -39 dB and -41 dB relative amplitude.
        let mut x = Vec::new();
        for gain_db in [0.0f32, -39.0, -41.0] {
            let g = 10f32.powf(gain_db / 20.0);
            x.extend((0..160).map(|n| g * if n % 2 == 0 { 1.0 } else { -1.0 }));
        }
        let labels = vad_from_signal(&AudioBuffer::new(x).unwrap(), &cfg);
        assert_eq!(labels.0, vec![true, true, false]);
    }

    #[test]
    fn si_snr_cases() {
        let t: Vec<f32> = (0..1000).map(|n| (n as f32 * 0.05).sin()).collect();
        let ta = AudioBuffer::new(t.clone()).unwrap();
        assert_eq!(si_snr(&ta, &ta).unwrap(), SI_SNR_CAP_DB);
        let t2 = AudioBuffer::new(t.iter().map(|v| 2.0 * v).collect()).unwrap();
        assert_eq!(si_snr(&t2, &ta).unwrap(), SI_SNR_CAP_DB);
        // Orthogonal equal-power pair: sin/cos over whole periods.
        let n = 1600;
        let s: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f32::consts::PI * 10.0 * i as f32 / n as f32).sin())
            .collect();
        let c: Vec<f32> = (0..n)
            .map(|i| (2.0 * std::f32::consts::PI * 10.0 * i as f32 / n as f32).cos())
            .collect();
        let est = AudioBuffer::new(s.iter().zip(&c).map(|(a, b)| a + b).collect()).unwrap();
        let v = si_snr(&est, &AudioBuffer::new(s).unwrap()).unwrap();
        assert!(v.abs() < 1e-3, "{v}");
        assert!(si_snr(&ta, &AudioBuffer::zeros(1000)).is_err());
    }

    #[test]
    fn erle_cases() {
        let m: Vec<f32> = (0..1000).map(|n| (n as f32 * 0.1).sin()).collect();
        let mic = AudioBuffer::new(m.clone()).unwrap();
        let out = AudioBuffer::new(m.iter().map(|v| v / 10.0).collect()).unwrap();
        assert!((erle(&mic, &out).unwrap() - 20.0).abs() < 1e-6);
        assert!(erle(&mic, &mic).unwrap().abs() < 1e-12);
        assert!(erle(&mic, &AudioBuffer::zeros(1000)).is_err());
    }
}
