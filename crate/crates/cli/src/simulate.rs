use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use smru_core::scenario::{measured_ratio_db, mix_scene, RirSpec, Scenario, SceneSpec};
use smru_core::signal::{write_wav, SAMPLE_RATE};

use crate::error::Result;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scene description as JSON; replaces the individual flags.
    #[arg(long, conflicts_with_all = ["seed", "duration", "scenario", "ser", "snr", "rir_ms", "t60"])]
    pub spec_json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Length in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub duration: f64,
    /// ST-NE, ST-FE or DT.
    #[arg(long, default_value = "DT")]
    pub scenario: Scenario,
    /// Signal-to-echo ratio in dB (double talk only).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ser: f64,
    /// Signal-to-noise ratio in dB; `inf` disables noise.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr: f64,
    /// Room impulse response length in milliseconds.
    #[arg(long)]
    pub rir_ms: Option<f64>,
    /// Reverberation time in seconds.
    #[arg(long)]
    pub t60: Option<f64>,
    /// Directory receiving the WAV files and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct SceneFiles {
    pub mic: String,
    pub farend: String,
    pub nearend: String,
    pub echo: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub spec: SceneSpec,
    pub sample_rate: u32,
    pub samples: usize,
    pub files: SceneFiles,
    /// Active-frame near-end to echo ratio, when both are present.
    pub measured_ser_db: Option<f64>,
    /// Active-frame reference to noise ratio, when noise is present.
    pub measured_snr_db: Option<f64>,
}

impl SimulateArgs {
    fn spec(&self) -> Result<SceneSpec> {
        if let Some(path) = &self.spec_json {
            let spec: SceneSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            spec.validate()?;
            return Ok(spec);
        }
        let mut spec = SceneSpec::new(self.seed, self.duration, self.scenario, self.ser, self.snr);
        let defaults = RirSpec::default();
        spec.rir = RirSpec {
            length_ms: self.rir_ms.unwrap_or(defaults.length_ms),
            t60_s: self.t60.unwrap_or(defaults.t60_s),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn run(args: &SimulateArgs) -> Result<Manifest> {
    let spec = args.spec()?;
    let scene = mix_scene(&spec)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let write = |name: &str, audio| -> Result<String> {
        write_wav(Path::new(&args.out_dir).join(name), audio)?;
        Ok(name.to_string())
    };
    let files = SceneFiles {
        mic: write("mic.wav", &scene.mic)?,
        farend: write("farend.wav", &scene.far_end)?,
        nearend: write("nearend.wav", &scene.near_end)?,
        echo: write("echo.wav", &scene.echo)?,
    };
    let has_near = spec.scenario != Scenario::SingleTalkFarEnd;
    let has_echo = spec.scenario != Scenario::SingleTalkNearEnd;
    let reference = if has_near {
        &scene.near_end
    } else {
        &scene.echo
    };
    let manifest = Manifest {
        sample_rate: SAMPLE_RATE,
        samples: scene.mic.len(),
        files,
        measured_ser_db: (has_near && has_echo)
            .then(|| measured_ratio_db(&scene.near_end, &scene.echo))
            .and_then(finite),
        measured_snr_db: spec
            .snr_db
            .is_finite()
            .then(|| measured_ratio_db(reference, &scene.noise))
            .and_then(finite),
        spec,
    };
    std::fs::write(
        args.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}
