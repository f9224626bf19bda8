//! Shape inference from a [`ModelConfig`] alone, without running the graph.

use super::config::{ModelConfig, INPUT_CHANNELS};
use super::params::parameter_specs;
use super::ShapeTrace;

/// Every intermediate shape of a forward pass over `frames` frames, with the
/// same labels [`smru_forward_traced`](super::smru_forward_traced) records.
pub fn infer_shapes(cfg: &ModelConfig, frames: usize) -> ShapeTrace {
    let (e, f, q) = (cfg.embed_dim, cfg.bins(), cfg.bands());
    let mut out: ShapeTrace = vec![
        ("input".into(), vec![INPUT_CHANNELS, frames, f]),
        ("stem".into(), vec![e, frames, f]),
        ("split".into(), vec![e, frames, q]),
    ];
    for (j, &lambda) in cfg.lambda_schedule.iter().enumerate() {
        out.push((format!("block{}.down", j + 1), vec![e, frames / lambda, q]));
    }
    out.push(("unet".into(), vec![e, frames, q]));
    out.push(("mask".into(), vec![INPUT_CHANNELS, frames, f]));
    out.push(("masked".into(), vec![frames, f]));
    if cfg.postnet.enabled {
        out.push(("df_coeffs".into(), vec![frames, f, cfg.postnet.df_order]));
    }
    out.push(("output".into(), vec![frames, f]));
    out
}

/// Number of scalar parameters the graph for `cfg` holds.
pub fn parameter_count(cfg: &ModelConfig) -> usize {
    parameter_specs(cfg)
        .iter()
        .map(|s| s.shape.iter().product::<usize>())
        .sum()
}
