use clap::{ArgGroup, Args};
use smru_core::complexity::{count_macs, ComplexityReport};
use smru_core::model::ModelConfig;

use crate::error::Result;

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("size").required(true).args(["preset", "embedding"])))]
pub struct MacsArgs {
    /// Architecture preset: T, S, L or H.
    #[arg(long)]
    pub preset: Option<String>,
    /// Base architecture with this embedding size.
    #[arg(long)]
    pub embedding: Option<usize>,
    /// Leave the postnet out of the count.
    #[arg(long)]
    pub no_postnet: bool,
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    pub table: bool,
}

pub fn run(args: &MacsArgs) -> Result<ComplexityReport> {
    let mut cfg = match (&args.preset, args.embedding) {
        (Some(name), _) => ModelConfig::preset(name)?,
        (None, Some(e)) => ModelConfig::with_embed_dim(e),
        (None, None) => unreachable!("clap requires --preset or --embedding"),
    };
    if args.no_postnet {
        cfg = cfg.without_postnet();
    }
    cfg.validate()?;
    Ok(count_macs(&cfg))
}
