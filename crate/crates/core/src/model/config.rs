use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::BINS;

/// Frequency region of the band-split layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub bins: usize,
    pub freq_stride: usize,
    /// Frequency extent of each parallel convolution (one per scale).
    pub kernels: Vec<usize>,
}

impl RegionConfig {
    /// Sub-bands produced by this region: `ceil(bins / stride)`.
    pub fn bands(&self) -> usize {
        self.bins.div_ceil(self.freq_stride)
    }

    /// Zeros appended on the high-frequency side so a kernel of width `k`
    /// yields exactly [`bands`](Self::bands) outputs.
    pub fn right_pad(&self, kernel: usize) -> usize {
        (self.bands() - 1) * self.freq_stride + kernel - self.bins
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostnetConfig {
    pub enabled: bool,
    pub hidden: usize,
    pub gru_layers: usize,
    pub groups: usize,
    pub df_order: usize,
}

impl Default for PostnetConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            hidden: 128,
            gru_layers: 2,
            groups: 8,
            df_order: 5,
        }
    }
}

/// Full architecture description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: String,
    pub embed_dim: usize,
    pub regions: Vec<RegionConfig>,
    pub lambda_schedule: Vec<usize>,
    pub num_blocks: usize,
    /// Multi-scale band split; `false` keeps only the first kernel per region.
    pub multi_scale: bool,
    /// Dense normalized cross-scale sums; `false` leaves the sequential chain
    /// with mirror skips only.
    pub dense_skips: bool,
    /// Band-merge MLP hidden width is `max(mult * E, min)`.
    pub merge_hidden_mult: usize,
    pub merge_hidden_min: usize,
    pub postnet: PostnetConfig,
}

pub const INPUT_CHANNELS: usize = 8;
pub const PRESET_NAMES: [&str; 4] = ["T", "S", "L", "H"];

const PRESET_T: &str = include_str!("../../presets/smru-t.json");
const PRESET_S: &str = include_str!("../../presets/smru-s.json");
const PRESET_L: &str = include_str!("../../presets/smru-l.json");
const PRESET_H: &str = include_str!("../../presets/smru-h.json");

impl ModelConfig {
    /// Base architecture with the given embedding size.
    pub fn with_embed_dim(embed_dim: usize) -> Self {
        Self {
            preset: format!("E{embed_dim}"),
            embed_dim,
            regions: vec![
                RegionConfig {
                    bins: 20,
                    freq_stride: 4,
                    kernels: vec![4, 8, 12],
                },
                RegionConfig {
                    bins: 60,
                    freq_stride: 10,
                    kernels: vec![10, 20, 30],
                },
                RegionConfig {
                    bins: 81,
                    freq_stride: 20,
                    kernels: vec![20, 30, 40],
                },
            ],
            lambda_schedule: vec![1, 2, 4, 8, 16, 32, 32, 16, 8, 4, 2, 1],
            num_blocks: 12,
            multi_scale: true,
            dense_skips: true,
            merge_hidden_mult: 4,
            merge_hidden_min: 192,
            postnet: PostnetConfig::default(),
        }
    }

    /// One of the shipped presets `T`, `S`, `L`, `H` (case-insensitive).
    pub fn preset(name: &str) -> Result<Self> {
        let src = match name.to_ascii_uppercase().as_str() {
            "T" => PRESET_T,
            "S" => PRESET_S,
            "L" => PRESET_L,
            "H" => PRESET_H,
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected one of T, S, L, H)"
                )))
            }
        };
        let cfg: ModelConfig =
            serde_json::from_str(src).map_err(|e| Error::Config(format!("preset {name}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(src).map_err(|e| Error::Config(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn without_postnet(mut self) -> Self {
        self.postnet.enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.embed_dim == 0 {
            return fail("embedding dimension must be positive".into());
        }
        if self.regions.is_empty() {
            return fail("at least one frequency region is required".into());
        }
        let total: usize = self.regions.iter().map(|r| r.bins).sum();
        if total != BINS {
            return fail(format!("region bins sum to {total}, expected {BINS}"));
        }
        let scales = self.regions[0].kernels.len();
        for (p, r) in self.regions.iter().enumerate() {
            if r.bins == 0 || r.freq_stride == 0 {
                return fail(format!("region {p} has zero bins or stride"));
            }
            if r.kernels.len() != scales || scales == 0 {
                return fail("every region needs the same non-zero number of kernels".into());
            }
            if let Some(k) = r.kernels.iter().find(|&&k| k < r.freq_stride) {
                return fail(format!(
                    "region {p}: kernel {k} narrower than stride {}",
                    r.freq_stride
                ));
            }
        }
        if self.num_blocks != self.lambda_schedule.len() {
            return fail(format!(
                "num_blocks {} != schedule length {}",
                self.num_blocks,
                self.lambda_schedule.len()
            ));
        }
        if self.lambda_schedule.contains(&0) {
            return fail("compression ratios must be >= 1".into());
        }
        let n = self.lambda_schedule.len();
        if (0..n).any(|i| self.lambda_schedule[i] != self.lambda_schedule[n - 1 - i]) {
            return fail("compression schedule must be palindromic".into());
        }
        if self.lambda_schedule[..n.div_ceil(2)]
            .windows(2)
            .any(|w| w[1] < w[0])
        {
            return fail("encoder compression ratios must be non-decreasing".into());
        }
        if self.merge_hidden_mult == 0 && self.merge_hidden_min == 0 {
            return fail("band-merge hidden width would be zero".into());
        }
        let pn = &self.postnet;
        if pn.enabled
            && (pn.hidden == 0
                || pn.gru_layers == 0
                || pn.groups == 0
                || pn.df_order == 0
                || !pn.hidden.is_multiple_of(pn.groups)
                || pn.groups > self.deep_filter_outputs())
        {
            return fail("postnet needs positive sizes and hidden divisible by groups".into());
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.regions.iter().map(|r| r.bins).sum()
    }

    /// Convolution scales `M` actually used by the split layer.
    pub fn scales(&self) -> usize {
        if self.multi_scale {
            self.regions[0].kernels.len()
        } else {
            1
        }
    }

    pub fn region_kernels(&self, region: usize) -> &[usize] {
        &self.regions[region].kernels[..self.scales()]
    }

    pub fn bands(&self) -> usize {
        self.regions.iter().map(RegionConfig::bands).sum()
    }

    pub fn merge_hidden(&self) -> usize {
        (self.merge_hidden_mult * self.embed_dim).max(self.merge_hidden_min)
    }

    pub fn band_layout(&self) -> BandLayout {
        BandLayout::from_regions(&self.regions)
    }

    /// Values emitted per frame by the postnet's group linear layer.
    pub fn deep_filter_outputs(&self) -> usize {
        2 * self.postnet.df_order * self.bins()
    }

    /// FNV-1a over the canonical JSON form.
    pub fn hash(&self) -> u64 {
        fnv1a64(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sub-band partition of the frequency axis used by split and merge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BandLayout {
    widths: Vec<usize>,
    offsets: Vec<usize>,
}

impl BandLayout {
    pub fn from_regions(regions: &[RegionConfig]) -> Self {
        let mut widths = Vec::new();
        for r in regions {
            let q = r.bands();
            for i in 0..q {
                widths.push(if i + 1 < q {
                    r.freq_stride
                } else {
                    r.bins - (q - 1) * r.freq_stride
                });
            }
        }
        Self::from_widths(widths)
    }

    pub fn from_widths(widths: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(widths.len());
        let mut acc = 0;
        for w in &widths {
            offsets.push(acc);
            acc += w;
        }
        Self { widths, offsets }
    }

    pub fn bands(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn offset(&self, band: usize) -> usize {
        self.offsets[band]
    }

    pub fn total_bins(&self) -> usize {
        self.widths.iter().sum()
    }
}
