use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use smru_core::metrics::{erle, si_snr};
use smru_core::pipeline::process;
use smru_core::signal::{read_wav, write_wav, AudioBuffer, HOP};
use smru_core::stream::stream_process;

use crate::error::{CliError, Result};
use crate::model::ModelArgs;

#[derive(Args, Debug)]
pub struct ProcessArgs {
    /// Microphone recording (16 kHz mono PCM16 WAV).
    #[arg(long)]
    pub mic: PathBuf,
    /// Far-end reference, same length as the microphone signal.
    #[arg(long)]
    pub farend: PathBuf,
    /// Enhanced output WAV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Run hop by hop through the streaming runtime.
    #[arg(long)]
    pub streaming: bool,
    /// Clean near-end reference; enables SI-SNR and ERLE.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Also write the metrics JSON to this file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct ProcessReport {
    pub preset: String,
    pub mode: &'static str,
    pub postnet: bool,
    pub samples: usize,
    pub duration_s: f64,
    pub output: String,
    pub si_snr_db: Option<f64>,
    pub erle_db: Option<f64>,
}

pub fn run(args: &ProcessArgs) -> Result<ProcessReport> {
    let mic = read_wav(&args.mic)?;
    let far = read_wav(&args.farend)?;
    if mic.len() != far.len() {
        return Err(CliError::Format(format!(
            "microphone has {} samples but far-end has {}",
            mic.len(),
            far.len()
        )));
    }
    let target = args.target.as_ref().map(read_wav).transpose()?;
    let model = args.model.load()?;

    let enhanced = if args.streaming {
        let streamed = stream_process(model.clone(), mic.samples(), far.samples())?;
        AudioBuffer::new(streamed[HOP..HOP + mic.len()].to_vec())?
    } else {
        process(&model, &mic, &far)?
    };
    write_wav(&args.out, &enhanced)?;

    let (si_snr_db, erle_db) = match &target {
        Some(t) if t.len() != enhanced.len() => {
            return Err(CliError::Format(format!(
                "target has {} samples, expected {}",
                t.len(),
                enhanced.len()
            )))
        }
        Some(t) => (Some(si_snr(&enhanced, t)?), Some(erle(&mic, &enhanced)?)),
        None => (None, None),
    };
    let report = ProcessReport {
        preset: model.config().preset.clone(),
        mode: if args.streaming {
            "streaming"
        } else {
            "offline"
        },
        postnet: model.config().postnet.enabled,
        samples: enhanced.len(),
        duration_s: enhanced.duration_secs(),
        output: args.out.display().to_string(),
        si_snr_db,
        erle_db,
    };
    if let Some(path) = &args.metrics {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
