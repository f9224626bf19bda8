use std::time::Instant;

use clap::Args;
use serde::Serialize;
use smru_core::scenario::{mix_scene, Scenario, SceneSpec};
use smru_core::signal::HOP;
use smru_core::stream::SmruStream;

use crate::error::{CliError, Result};
use crate::model::ModelArgs;

/// Seconds of audio pushed through a throw-away stream before timing.
const WARM_UP_SECONDS: f64 = 1.0;

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Length of the synthetic double-talk input.
    #[arg(long, default_value_t = 10.0)]
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub preset: String,
    pub postnet: bool,
    pub audio_seconds: f64,
    pub pushes: usize,
    pub processing_seconds: f64,
    /// Mean per-push time over the 10 ms hop duration.
    pub rtf: f64,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub max_latency_ms: f64,
}

pub fn run(args: &BenchArgs) -> Result<BenchReport> {
    if !(args.seconds > 0.0 && args.seconds.is_finite()) {
        return Err(CliError::Usage(format!(
            "--seconds must be positive, got {}",
            args.seconds
        )));
    }
    let model = args.model.load()?;
    let scene = mix_scene(&SceneSpec::new(
        args.model.seed,
        args.seconds.max(WARM_UP_SECONDS),
        Scenario::DoubleTalk,
        0.0,
        20.0,
    ))?;
    let (d, x) = (scene.mic.samples(), scene.far_end.samples());
    let hops = ((args.seconds * 100.0).round() as usize).clamp(1, d.len() / HOP);

    let mut warm = SmruStream::new(model.clone());
    for k in 0..(WARM_UP_SECONDS * 100.0) as usize {
        warm.push(&d[k * HOP..(k + 1) * HOP], &x[k * HOP..(k + 1) * HOP])?;
    }

    let mut stream = SmruStream::new(model.clone());
    let mut times = Vec::with_capacity(hops);
    for k in 0..hops {
        let (dk, xk) = (&d[k * HOP..(k + 1) * HOP], &x[k * HOP..(k + 1) * HOP]);
        let start = Instant::now();
        let out = stream.push(dk, xk)?;
        times.push(start.elapsed().as_secs_f64());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Numeric(format!("non-finite output at push {k}")));
        }
    }
    let total: f64 = times.iter().sum();
    let mean = total / hops as f64;
    times.sort_by(f64::total_cmp);
    let p95 = times[((hops * 95).div_ceil(100)).clamp(1, hops) - 1];
    Ok(BenchReport {
        preset: model.config().preset.clone(),
        postnet: model.config().postnet.enabled,
        audio_seconds: hops as f64 * 0.01,
        pushes: hops,
        processing_seconds: total,
        rtf: mean / 0.01,
        mean_latency_ms: mean * 1e3,
        p95_latency_ms: p95 * 1e3,
        max_latency_ms: times[hops - 1] * 1e3,
    })
}
