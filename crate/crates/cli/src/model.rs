use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use smru_core::model::{ModelConfig, Smru};
use smru_core::weights::WeightStore;

use crate::error::Result;

/// Network selection shared by `process` and `bench`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Architecture preset: T, S, L or H.
    #[arg(long, default_value = "T")]
    pub preset: String,
    /// Weight file made for the preset; seeded weights are used otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed for the initial weights when no weight file is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the deep-filtering postnet.
    #[arg(long)]
    pub no_postnet: bool,
}

impl ModelArgs {
    pub fn load(&self) -> Result<Arc<Smru>> {
        let cfg = ModelConfig::preset(&self.preset)?;
        let model = match &self.weights {
            Some(path) => Smru::new(cfg.clone(), &WeightStore::load(path, &cfg)?)?,
            None => Smru::seeded(cfg, self.seed)?,
        };
        Ok(Arc::new(if self.no_postnet {
            model.without_postnet()
        } else {
            model
        }))
    }
}
