use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use smru_core::model::ModelConfig;
use smru_core::weights::init_weights;

use crate::error::Result;

#[derive(Args, Debug)]
pub struct InitWeightsArgs {
    /// Architecture preset: T, S, L or H.
    #[arg(long, default_value = "T")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination weight file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct WeightsReport {
    pub preset: String,
    pub seed: u64,
    /// Hex-encoded configuration hash stored in the file header.
    pub config_hash: String,
    pub tensors: usize,
    pub parameters: usize,
    pub bytes: usize,
    pub output: String,
}

pub fn run(args: &InitWeightsArgs) -> Result<WeightsReport> {
    let cfg = ModelConfig::preset(&args.preset)?;
    let store = init_weights(&cfg, args.seed)?;
    let bytes = store.to_bytes();
    std::fs::write(&args.out, &bytes)?;
    Ok(WeightsReport {
        preset: cfg.preset.clone(),
        seed: args.seed,
        config_hash: format!("{:016x}", store.config_hash()),
        tensors: store.len(),
        parameters: store.parameter_count(),
        bytes: bytes.len(),
        output: args.out.display().to_string(),
    })
}
