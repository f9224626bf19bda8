//! Analytic multiply-accumulate counts.
//!
//! One MAC per multiply-accumulate; normalizations, activations and
//! element-wise products are not counted. Convolutions cost
//! `C_in/groups * C_out * prod(kernel) * output positions`, a GRU step
//! `3 * (in + hidden) * hidden + 3 * hidden`, a linear layer `in * out`.
//! Work inside a VR block runs once per compressed frame, i.e. `100 / lambda`
//! times per second.

use serde::{Deserialize, Serialize};

use crate::model::shapes::parameter_count;
use crate::model::{ModelConfig, INPUT_CHANNELS};

pub const FRAMES_PER_SECOND: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleMacs {
    pub name: String,
    /// Average MACs per full-rate frame.
    pub macs_per_frame: f64,
    pub macs_per_second: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub preset: String,
    pub embed_dim: usize,
    pub frames_per_second: f64,
    pub modules: Vec<ModuleMacs>,
    pub total_macs_per_frame: f64,
    pub total_macs_per_second: f64,
    /// Everything except the postnet.
    pub model_macs_per_second: f64,
    pub postnet_macs_per_second: f64,
    pub parameter_count: usize,
}

impl ComplexityReport {
    pub fn module(&self, name: &str) -> Option<&ModuleMacs> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "preset {} (E={}), {} parameters\n{:<14} {:>16} {:>16}\n",
            self.preset, self.embed_dim, self.parameter_count, "module", "MACs/frame", "MACs/s"
        );
        for m in &self.modules {
            s.push_str(&format!(
                "{:<14} {:>16.1} {:>16.0}\n",
                m.name, m.macs_per_frame, m.macs_per_second
            ));
        }
        s.push_str(&format!(
            "{:<14} {:>16.1} {:>16.0}\nmodel without postnet: {:.4} G/s; postnet: {:.2} M/s\n",
            "total",
            self.total_macs_per_frame,
            self.total_macs_per_second,
            self.model_macs_per_second / 1e9,
            self.postnet_macs_per_second / 1e6
        ));
        s
    }
}

fn gru_step(input: f64, hidden: f64) -> f64 {
    3.0 * (input + hidden) * hidden + 3.0 * hidden
}

/// MACs of one VR block per compressed frame.
pub fn vr_block_macs(embed: usize, bands: usize, lambda: usize) -> f64 {
    let (e, q, l) = (embed as f64, bands as f64, lambda as f64);
    let ds = q * e * l;
    let gru = q * gru_step(e, e);
    let fc = q * e * e;
    let mlp = q * 2.0 * e * e + e * q * q + q * e * e;
    let us = q * e * e;
    ds + gru + fc + mlp + us
}

pub fn count_macs(cfg: &ModelConfig) -> ComplexityReport {
    let e = cfg.embed_dim as f64;
    let f = cfg.bins() as f64;
    let q = cfg.bands() as f64;
    let mut modules = Vec::new();
    let mut push = |name: String, per_frame: f64| {
        modules.push(ModuleMacs {
            name,
            macs_per_frame: per_frame,
            macs_per_second: per_frame * FRAMES_PER_SECOND,
        });
    };
    push("stem".into(), INPUT_CHANNELS as f64 * e * f);
    let mut split = 0.0;
    for (p, region) in cfg.regions.iter().enumerate() {
        for &k in cfg.region_kernels(p) {
            split += e * e * k as f64 * region.bands() as f64;
        }
    }
    split += cfg.scales() as f64 * e * e * q;
    push("split".into(), split);
    for (j, &lambda) in cfg.lambda_schedule.iter().enumerate() {
        push(
            format!("block{:02}", j + 1),
            vr_block_macs(cfg.embed_dim, cfg.bands(), lambda) / lambda as f64,
        );
    }
    let hm = cfg.merge_hidden() as f64;
    let merge: f64 = cfg
        .band_layout()
        .widths()
        .iter()
        .map(|&w| e * hm + hm * (INPUT_CHANNELS * w) as f64)
        .sum();
    push("merge".into(), merge);
    let mut postnet = 0.0;
    if cfg.postnet.enabled {
        let pn = &cfg.postnet;
        let h = pn.hidden as f64;
        postnet += (f + q * e) * h;
        postnet += pn.gru_layers as f64 * gru_step(h, h);
        postnet += (h / pn.groups as f64) * cfg.deep_filter_outputs() as f64;
        // Complex taps: four real MACs each.
        postnet += 4.0 * f * pn.df_order as f64;
        push("postnet".into(), postnet);
    }
    let total: f64 = modules.iter().map(|m| m.macs_per_frame).sum();
    ComplexityReport {
        preset: cfg.preset.clone(),
        embed_dim: cfg.embed_dim,
        frames_per_second: FRAMES_PER_SECOND,
        total_macs_per_frame: total,
        total_macs_per_second: total * FRAMES_PER_SECOND,
        model_macs_per_second: (total - postnet) * FRAMES_PER_SECOND,
        postnet_macs_per_second: postnet * FRAMES_PER_SECOND,
        parameter_count: parameter_count(cfg),
        modules,
    }
}

/// Smallest embedding size whose model (postnet excluded) costs at least
/// `target` MACs/s.
pub fn embed_dim_for(base: &ModelConfig, target_macs_per_second: f64) -> usize {
    let cost = |e: usize| {
        let mut c = base.clone();
        c.embed_dim = e;
        count_macs(&c).model_macs_per_second
    };
    let (mut lo, mut hi) = (1usize, 2usize);
    while cost(hi) < target_macs_per_second {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cost(mid) < target_macs_per_second {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (cost(lo) - target_macs_per_second).abs() < (cost(hi) - target_macs_per_second).abs() {
        lo
    } else {
        hi
    }
}
