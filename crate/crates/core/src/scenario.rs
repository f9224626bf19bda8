//! Synthetic scenes: speech-like sources, exponential-decay echo paths and
//! SER/SNR-calibrated mixing, reproducible from a seed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::{active_power, VadConfig};
use crate::model::fnv1a64;
use crate::signal::{AudioBuffer, SAMPLE_RATE};
use crate::tensor::SplitMix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Near-end speech only.
    SingleTalkNearEnd,
    /// Far-end echo only.
    SingleTalkFarEnd,
    DoubleTalk,
}

impl Scenario {
    pub fn tag(self) -> &'static str {
        match self {
            Self::SingleTalkNearEnd => "ST-NE",
            Self::SingleTalkFarEnd => "ST-FE",
            Self::DoubleTalk => "DT",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ST-NE" => Ok(Self::SingleTalkNearEnd),
            "ST-FE" => Ok(Self::SingleTalkFarEnd),
            "DT" => Ok(Self::DoubleTalk),
            _ => Err(Error::Config(format!(
                "unknown scenario '{s}' (expected ST-NE, ST-FE or DT)"
            ))),
        }
    }
}

impl Serialize for Scenario {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Decibel values that may be infinite; JSON carries `"inf"` / `"-inf"`.
mod db {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("invalid dB value '{t}'"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RirSpec {
    pub length_ms: f64,
    /// Time for the envelope to decay by 60 dB.
    pub t60_s: f64,
}

impl Default for RirSpec {
    fn default() -> Self {
        Self {
            length_ms: 100.0,
            t60_s: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub scenario: Scenario,
    #[serde(with = "db")]
    pub ser_db: f64,
    /// `inf` disables noise.
    #[serde(with = "db")]
    pub snr_db: f64,
    #[serde(default)]
    pub rir: RirSpec,
}

impl SceneSpec {
    /// Spec whose SER is implied by the scenario for single-talk cases.
    pub fn new(seed: u64, duration_s: f64, scenario: Scenario, ser_db: f64, snr_db: f64) -> Self {
        let ser_db = match scenario {
            Scenario::SingleTalkNearEnd => f64::INFINITY,
            Scenario::SingleTalkFarEnd => f64::NEG_INFINITY,
            Scenario::DoubleTalk => ser_db,
        };
        Self {
            seed,
            duration_s,
            scenario,
            ser_db,
            snr_db,
            rir: RirSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return fail(format!(
                "duration must be positive, got {}",
                self.duration_s
            ));
        }
        let ser_ok = match self.scenario {
            Scenario::SingleTalkNearEnd => self.ser_db == f64::INFINITY,
            Scenario::SingleTalkFarEnd => self.ser_db == f64::NEG_INFINITY,
            Scenario::DoubleTalk => self.ser_db.is_finite(),
        };
        if !ser_ok {
            return fail(format!(
                "scenario {} is inconsistent with SER {} dB",
                self.scenario, self.ser_db
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return fail(format!("invalid SNR {} dB", self.snr_db));
        }
        if !(self.rir.length_ms > 0.0 && self.rir.t60_s >= 0.0 && self.rir.t60_s.is_finite()) {
            return fail("RIR needs positive length and non-negative T60".into());
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * SAMPLE_RATE as f64).round() as usize
    }
}

/// Mixed scene with separately stored components.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Microphone `d = near_end + echo + noise`.
    pub mic: AudioBuffer,
    pub far_end: AudioBuffer,
    pub near_end: AudioBuffer,
    pub echo: AudioBuffer,
    pub noise: AudioBuffer,
    pub rir: Vec<f32>,
}

/// Active-frame RMS of near-end (or, without near-end speech, of the echo).
pub const REFERENCE_RMS: f64 = 0.05;

fn sub_seed(seed: u64, tag: &str) -> u64 {
    SplitMix64::new(seed ^ fnv1a64(tag.as_bytes())).next_u64()
}

/// White-noise taps under an `exp(-t / tau)` envelope (`tau` from T60),
/// normalized to unit energy.
pub fn synth_rir(spec: &RirSpec, seed: u64) -> Result<Vec<f32>> {
    let len = (spec.length_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize;
    if len == 0 || spec.t60_s < 0.0 || !spec.t60_s.is_finite() {
        return Err(Error::Config(format!("invalid RIR spec {spec:?}")));
    }
    let tau = spec.t60_s * SAMPLE_RATE as f64 / (3.0 * std::f64::consts::LN_10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let g: f64 = StandardNormal.sample(&mut rng);
            let env = if n == 0 {
                1.0
            } else if tau > 0.0 {
                (-(n as f64) / tau).exp()
            } else {
                0.0
            };
            g * env
        })
        .collect();
    if taps[0] == 0.0 {
        taps[0] = 1.0;
    }
    let energy: f64 = taps.iter().map(|v| v * v).sum();
    let norm = energy.sqrt();
    taps.iter_mut().for_each(|v| *v /= norm);
    Ok(taps.into_iter().map(|v| v as f32).collect())
}

/// Fundamental frequency (Hz) of the voice that [`synth_speech`] renders for
/// `seed`, before pitch modulation.
pub fn speech_f0(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "speech.f0"));
    rng.random_range(100.0..220.0)
}

/// Deterministic speech-like signal: pitch-modulated harmonics under a
/// syllabic on/off envelope with raised-cosine edges. Peak level about 0.3.
pub fn synth_speech(seed: u64, duration_s: f64) -> Result<AudioBuffer> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Config(format!("invalid duration {duration_s}")));
    }
    let fs = SAMPLE_RATE as f64;
    let n = (duration_s * fs).round() as usize;
    let f0 = speech_f0(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "speech.body"));
    let vib_rate = rng.random_range(2.0..5.0);
    let vib_depth = rng.random_range(0.03..0.08);
    let harmonics = ((3800.0 / f0) as usize).max(1);
    let formant = rng.random_range(500.0..900.0);
    let amps: Vec<f64> = (1..=harmonics)
        .map(|k| {
            let f = k as f64 * f0;
            let boost = 1.0 + 0.8 * (-((f - formant) / 250.0).powi(2)).exp();
            boost / k as f64
        })
        .collect();

    // Syllable envelope: alternating voiced segments and pauses.
    let mut envelope = vec![0.0f64; n];
    let mut pos = 0usize;
    let ramp = (0.015 * fs) as usize;
    while pos < n {
        let on = (rng.random_range(0.15..0.35) * fs) as usize;
        let off = (rng.random_range(0.05..0.2) * fs) as usize;
        let level = rng.random_range(0.6..1.0);
        for i in 0..on.min(n - pos) {
            let edge = if i < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * i as f64 / ramp as f64).cos()
            } else if on - i <= ramp {
                0.5 - 0.5 * (std::f64::consts::PI * (on - i) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            envelope[pos + i] = level * edge;
        }
        pos += on + off;
    }

    let norm: f64 = amps.iter().sum();
    let mut phase = 0.0f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let f = f0 * (1.0 + vib_depth * (two_pi * vib_rate * t).sin());
            phase = (phase + two_pi * f / fs) % two_pi;
            let v: f64 = amps
                .iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * phase).sin())
                .sum();
            (0.3 * envelope[i] * v / norm) as f32
        })
        .collect();
    AudioBuffer::new(samples)
}

fn convolve(x: &[f32], h: &[f32], len: usize) -> Vec<f32> {
    (0..len)
        .map(|n| {
            let mut acc = 0.0f64;
            for (k, &hk) in h.iter().enumerate().take(n + 1) {
                acc += hk as f64 * x[n - k] as f64;
            }
            acc as f32
        })
        .collect()
}

fn scaled(x: &[f32], g: f64) -> Vec<f32> {
    x.iter().map(|&v| (v as f64 * g) as f32).collect()
}

/// Builds a scene: echo is the far-end convolved with a synthetic RIR and
/// scaled to the SER (active-frame powers), noise is white and scaled to
/// the SNR against the near-end (against the echo when there is no near-end
/// talker).
pub fn mix_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let n = spec.samples();
    let vad = VadConfig::default();
    let near_end = match spec.scenario {
        Scenario::SingleTalkFarEnd => vec![0.0f32; n],
        _ => {
            let s = synth_speech(sub_seed(spec.seed, "near"), spec.duration_s)?.into_samples();
            let p = active_power(&s, &vad);
            scaled(&s, REFERENCE_RMS / p.sqrt())
        }
    };
    let rir = synth_rir(&spec.rir, sub_seed(spec.seed, "rir"))?;
    let (far_end, echo) = match spec.scenario {
        Scenario::SingleTalkNearEnd => (vec![0.0f32; n], vec![0.0f32; n]),
        _ => {
            let x = synth_speech(sub_seed(spec.seed, "far"), spec.duration_s)?.into_samples();
            let raw = convolve(&x, &rir, n);
            let p_raw = active_power(&raw, &vad);
            let target = if spec.ser_db.is_finite() {
                active_power(&near_end, &vad) / 10f64.powf(spec.ser_db / 10.0)
            } else {
                REFERENCE_RMS * REFERENCE_RMS
            };
            (x, scaled(&raw, (target / p_raw).sqrt()))
        }
    };
    let noise = if spec.snr_db.is_finite() {
        let reference = match spec.scenario {
            Scenario::SingleTalkFarEnd => active_power(&echo, &vad),
            _ => active_power(&near_end, &vad),
        };
        let sigma = (reference / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        let dist = Normal::new(0.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, "noise"));
        let w: Vec<f32> = (0..n).map(|_| dist.sample(&mut rng) as f32).collect();
        scaled(&w, sigma / active_power(&w, &vad).sqrt())
    } else {
        vec![0.0f32; n]
    };
    let mic = (0..n).map(|i| near_end[i] + echo[i] + noise[i]).collect();
    Ok(Scene {
        spec: spec.clone(),
        mic: AudioBuffer::new(mic)?,
        far_end: AudioBuffer::new(far_end)?,
        near_end: AudioBuffer::new(near_end)?,
        echo: AudioBuffer::new(echo)?,
        noise: AudioBuffer::new(noise)?,
        rir,
    })
}

/// Measured `10 log10(P_a / P_b)` over each signal's active frames.
pub fn measured_ratio_db(a: &AudioBuffer, b: &AudioBuffer) -> f64 {
    let vad = VadConfig::default();
    10.0 * (active_power(a.samples(), &vad) / active_power(b.samples(), &vad)).log10()
}
