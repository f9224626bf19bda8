//! Exit criteria. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use smru_core::complexity::count_macs;
use smru_core::laec::laec_process;
use smru_core::metrics::{
    erle, erle_samples, mae_loss, si_snr, total_loss, vad_loss, LossWeights, VadLabels,
};
use smru_core::model::{ModelConfig, Smru};
use smru_core::pipeline::process;
use smru_core::scenario::{mix_scene, synth_speech, Scenario, SceneSpec};
use smru_core::signal::{istft, stft, AudioBuffer, Spectrogram, StftConfig, HOP, SAMPLE_RATE};
use smru_core::stream::{stream_process, SmruStream};
use smru_core::tensor::SplitMix64;

type Outcome = Result<String, Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail.into())
    }
}

fn causality() -> Outcome {
    let mut details = Vec::new();
    for (preset, seed) in [("T", 101), ("S", 102)] {
        let model = Smru::seeded(ModelConfig::preset(preset)?, seed)?;
        causality_sweep(&model, 100, 20, seed)?;
        details.push(format!("{preset}: 20 positions bit-identical"));
    }
    Ok(details.join("; "))
}

fn streaming_equivalence() -> Outcome {
    let model = Arc::new(Smru::seeded(ModelConfig::preset("T")?, 7)?);
    let scenarios = [
        Scenario::DoubleTalk,
        Scenario::SingleTalkFarEnd,
        Scenario::SingleTalkNearEnd,
    ];
    let mut rng = SplitMix64::new(2024);
    let mut worst = 0.0f32;
    for i in 0..10u64 {
        let ser = rng.symmetric(10.0) as f64;
        let snr = 5.0 + 25.0 * rng.next_f32() as f64;
        let spec = SceneSpec::new(1000 + i, 2.0, scenarios[i as usize % 3], ser, snr);
        let scene = mix_scene(&spec)?;
        let offline = process(&model, &scene.mic, &scene.far_end)?;
        let streamed = stream_process(model.clone(), scene.mic.samples(), scene.far_end.samples())?;
        if streamed.len() != offline.len() + HOP {
            return Err(format!("scene {i}: stream length {}", streamed.len()).into());
        }
        let diff = streamed[HOP..]
            .iter()
            .zip(offline.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        worst = worst.max(diff);
    }
    if worst > 1e-5 {
        return Err(format!("max abs diff {worst:e} > 1e-5").into());
    }

    let scene = mix_scene(&SceneSpec::new(77, 2.0, Scenario::DoubleTalk, 0.0, 20.0))?;
    let (d, x) = (scene.mic.samples(), scene.far_end.samples());
    let hops = d.len() / HOP;
    let cut = hops / 2;
    let mut a = SmruStream::new(model.clone());
    let mut reference = Vec::new();
    let mut snapshot = Vec::new();
    for k in 0..hops {
        if k == cut {
            snapshot = a.checkpoint();
        }
        let r = k * HOP..(k + 1) * HOP;
        reference.extend(a.push(&d[r.clone()], &x[r])?);
    }
    let mut b = SmruStream::restore(model, &snapshot)?;
    let mut resumed = Vec::new();
    for k in cut..hops {
        let r = k * HOP..(k + 1) * HOP;
        resumed.extend(b.push(&d[r.clone()], &x[r])?);
    }
    check(
        resumed == reference[cut * HOP..],
        format!(
            "10 scenes max abs diff {worst:e}; checkpoint at hop {cut} resumes bit-identically"
        ),
    )
}

fn stft_round_trip() -> Outcome {
    let cfg = StftConfig::default();
    let mut rng = SplitMix64::new(31);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let len = 3 * cfg.window_len + (rng.next_u64() % 16_000) as usize;
        let amp = 0.01 + rng.next_f32();
        let x: Vec<f32> = (0..len).map(|_| amp * rng.symmetric(1.0)).collect();
        let audio = AudioBuffer::new(x)?;
        let y = istft(&stft(&audio, &cfg)?, &cfg)?;
        let hi = y.len().min(len) - cfg.hop;
        let (mut err, mut norm) = (0.0f64, 0.0f64);
        for n in cfg.hop..hi {
            let (a, b) = (audio.samples()[n] as f64, y.samples()[n] as f64);
            err += (a - b).powi(2);
            norm += a * a;
        }
        let db = 10.0 * (err / norm).log10();
        if db > -50.0 {
            return Err(format!("signal {i}: interior error {db:.1} dB").into());
        }
        worst = worst.max(db);
    }
    Ok(format!(
        "worst interior error {worst:.1} dB over 20 signals"
    ))
}

fn complexity_bands() -> Outcome {
    let small =
        count_macs(&ModelConfig::with_embed_dim(10).without_postnet()).total_macs_per_second;
    let large =
        count_macs(&ModelConfig::with_embed_dim(200).without_postnet()).total_macs_per_second;
    let postnet = count_macs(&ModelConfig::preset("S")?).postnet_macs_per_second;
    let detail = format!(
        "E=10 {:.2} M/s, E=200 {:.3} G/s, postnet {:.2} M/s",
        small / 1e6,
        large / 1e9,
        postnet / 1e6
    );
    check(
        (40e6..=60e6).contains(&small)
            && (5.5e9..=8.0e9).contains(&large)
            && (20e6..=40e6).contains(&postnet),
        detail,
    )
}

fn linear_aec() -> Outcome {
    let spec = SceneSpec::new(5, 10.0, Scenario::SingleTalkFarEnd, 0.0, f64::INFINITY);
    let scene = mix_scene(&spec)?;
    let (e, _) = laec_process(&scene.mic, &scene.far_end)?;
    let fs = SAMPLE_RATE as usize;
    let tail = scene.mic.len() - fs;
    let db = erle_samples(&scene.mic.samples()[tail..], &e.samples()[tail..])?;

    let d = synth_speech(6, 3.0)?;
    let (e0, _) = laec_process(&d, &AudioBuffer::zeros(d.len()))?;
    let num: f64 = e0
        .samples()
        .iter()
        .zip(d.samples())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum();
    let den: f64 = d.samples().iter().map(|&v| (v as f64).powi(2)).sum();
    let rel = (num / den).sqrt();
    check(
        db >= 20.0 && rel <= 0.1,
        format!("last-second ERLE {db:.1} dB; x=0 relative error {rel:.2e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let errors = [
        ("conv2d", conv2d_oracle_error(50, 11)),
        ("conv1d", conv1d_oracle_error(50, 12)),
        ("gru", gru_oracle_error(50, 13)),
        ("linear", linear_oracle_error(50, 14)),
        ("deep_filter", deep_filter_oracle_error(50, 15)),
    ];
    let detail = errors
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(errors.iter().all(|(_, e)| *e <= 1e-6), detail)
}

fn loss_unit_values() -> Outcome {
    let zero = Spectrogram::zeros(10, 161);
    let vad = vad_loss(&zero, &VadLabels::all(false, 10), 0.1)?;
    let mut rng = SplitMix64::new(3);
    let s = random_spec(10, 161, &mut rng);
    let target = random_spec(10, 161, &mut rng);
    let mae = mae_loss(&s, &s)?;
    let labels = VadLabels((0..10).map(|t| t % 3 != 0).collect());
    let echo = VadLabels((0..10).map(|t| t % 2 == 0).collect());
    let at = |beta: f64| {
        LossWeights::with_beta(beta).and_then(|w| total_loss(&s, &target, &labels, &echo, &w))
    };
    let (l0, l1, l2, l3) = (at(0.0)?, at(1.0)?, at(2.0)?, at(3.0)?);
    let linear = ((l2 - l1) - (l1 - l0)).abs() <= 1e-9 * l3.abs().max(1.0)
        && ((l3 - l2) - (l1 - l0)).abs() <= 1e-9 * l3.abs().max(1.0);
    let beta = LossWeights::default().beta;
    check(
        vad == -10.0 && mae == 0.0 && linear && beta == 0.0002,
        format!("vad_loss(0) = {vad} dB, mae(S,S) = {mae}, linear in beta: {linear}, default beta {beta}"),
    )
}

fn metric_properties() -> Outcome {
    let target = synth_speech(8, 2.0)?;
    let mut rng = SplitMix64::new(4);
    let est: Vec<f32> = target
        .samples()
        .iter()
        .map(|&v| v + 0.02 * rng.symmetric(1.0))
        .collect();
    let base = si_snr(&AudioBuffer::new(est.clone())?, &target)?;
    let mut drift = 0.0f64;
    for alpha in [1e-3f32, 0.1, 0.5, 2.0, 10.0, 1e3] {
        let scaled = AudioBuffer::new(est.iter().map(|v| v * alpha).collect())?;
        let v = si_snr(&scaled, &target)?;
        drift = drift.max((v - base).abs());
    }
    let mic = synth_speech(9, 2.0)?;
    let quiet = AudioBuffer::new(mic.samples().iter().map(|v| v / 10.0).collect())?;
    let db = erle(&mic, &quiet)?;
    check(
        drift <= 1e-4 && (db - 20.0).abs() <= 1e-6,
        format!("si_snr drift {drift:.1e} dB; erle(mic, mic/10) = {db:.9} dB"),
    )
}

fn real_time_factor() -> Outcome {
    let model = Arc::new(Smru::seeded(ModelConfig::preset("T")?, 5)?);
    let scene = mix_scene(&SceneSpec::new(12, 10.0, Scenario::DoubleTalk, 0.0, 20.0))?;
    let (d, x) = (scene.mic.samples(), scene.far_end.samples());
    let mut stream = SmruStream::new(model);
    let mut times = Vec::with_capacity(d.len() / HOP);
    for k in 0..d.len() / HOP {
        let r = k * HOP..(k + 1) * HOP;
        let start = Instant::now();
        stream.push(&d[r.clone()], &x[r])?;
        times.push(start.elapsed().as_secs_f64());
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let p95 = times[(times.len() * 95 / 100).min(times.len() - 1)];
    let rtf = mean / 0.01;
    check(
        rtf < 0.5,
        format!(
            "preset T RTF {rtf:.4} (mean push {:.3} ms, p95 {:.3} ms, {} pushes)",
            mean * 1e3,
            p95 * 1e3,
            times.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("causality", causality),
        ("streaming-equivalence", streaming_equivalence),
        ("stft-round-trip", stft_round_trip),
        ("complexity-bands", complexity_bands),
        ("linear-aec", linear_aec),
        ("oracle-equivalence", oracle_equivalence),
        ("loss-unit-values", loss_unit_values),
        ("metric-properties", metric_properties),
        ("real-time-factor", real_time_factor),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
