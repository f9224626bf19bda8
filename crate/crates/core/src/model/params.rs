//! Canonical parameter names and the typed views built from a
//! [`WeightStore`].
//!
//! Naming scheme (`E` embedding, `Q` bands, `M` scales, `H` merge hidden,
//! `P` postnet hidden):
//!
//! ```text
//! split.stem.{weight [E,8,1,1], bias [E]}
//! split.r{p}.s{m}.{weight [E,E,1,k], bias [E]}
//! split.reduce.{weight [E,M*E,1,1], bias [E]}
//! split.norm.{gain, bias} [E]
//! unet.b{jj}.in_norm.{gain, bias} [E]
//! unet.b{jj}.ds.{weight [Q*E,1,lambda], bias [Q*E]}
//! unet.b{jj}.gru_norm.{gain, bias} [E]
//! unet.b{jj}.gru.{w_ih [3E,E], w_hh [3E,E], b_ih [3E], b_hh [3E]}
//! unet.b{jj}.fc.{weight [E,E], bias [E]}
//! unet.b{jj}.mlp.proj_in.{weight [2E,E], bias [2E]}
//! unet.b{jj}.mlp.gate_norm.{gain, bias} [E]
//! unet.b{jj}.mlp.band_proj.{weight [Q,Q], bias [Q]}
//! unet.b{jj}.mlp.proj_out.{weight [E,E], bias [E]}
//! unet.b{jj}.us.{weight [E,E], bias [E], zero_history [Q,E]}
//! merge.q{qq}.norm.{gain, bias} [E]
//! merge.q{qq}.fc1.{weight [H,E], bias [H]}
//! merge.q{qq}.fc2.{weight [8w,H], bias [8w]}
//! postnet.proj_in.{weight [P,F+Q*E], bias [P]}
//! postnet.gru{l}.{w_ih [3P,P], w_hh [3P,P], b_ih [3P], b_hh [3P]}
//! postnet.out.g{g}.{weight [n_g,P/G], bias [n_g]}
//! ```
//!
//! Blocks are numbered from 1 (`b01` .. `b12`), bands from 0.

use std::collections::HashSet;

use super::config::{ModelConfig, RegionConfig, INPUT_CHANNELS};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{linear_into, GruParams, Init, LayerNormParams, Tensor};
use crate::weights::WeightStore;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

struct SpecList(Vec<ParamSpec>);

impl SpecList {
    fn add(&mut self, name: String, shape: &[usize], init: Init) {
        self.0.push(ParamSpec {
            name,
            shape: shape.to_vec(),
            init,
        });
    }

    fn affine(&mut self, prefix: &str, out: usize, weight_shape: &[usize]) {
        self.add(format!("{prefix}.weight"), weight_shape, Init::UniformFanIn);
        self.add(format!("{prefix}.bias"), &[out], Init::UniformFanIn);
    }

    fn norm(&mut self, prefix: &str, dim: usize) {
        self.add(format!("{prefix}.gain"), &[dim], Init::Ones);
        self.add(format!("{prefix}.bias"), &[dim], Init::Zeros);
    }

    fn gru(&mut self, prefix: &str, input: usize, hidden: usize) {
        self.add(
            format!("{prefix}.w_ih"),
            &[3 * hidden, input],
            Init::UniformFanIn,
        );
        self.add(
            format!("{prefix}.w_hh"),
            &[3 * hidden, hidden],
            Init::UniformFanIn,
        );
        self.add(format!("{prefix}.b_ih"), &[3 * hidden], Init::UniformFanIn);
        self.add(format!("{prefix}.b_hh"), &[3 * hidden], Init::UniformFanIn);
    }
}

pub(crate) fn block_prefix(j: usize) -> String {
    format!("unet.b{:02}", j + 1)
}

/// Output boundaries of the postnet's grouped linear layer.
pub(crate) fn group_bounds(outputs: usize, groups: usize) -> Vec<usize> {
    (0..=groups).map(|g| g * outputs / groups).collect()
}

/// Every parameter of the graph for `cfg`, in canonical order.
pub fn parameter_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let e = cfg.embed_dim;
    let q = cfg.bands();
    let m = cfg.scales();
    let mut s = SpecList(Vec::new());
    s.affine("split.stem", e, &[e, INPUT_CHANNELS, 1, 1]);
    for p in 0..cfg.regions.len() {
        for (mi, &k) in cfg.region_kernels(p).iter().enumerate() {
            s.affine(&format!("split.r{p}.s{mi}"), e, &[e, e, 1, k]);
        }
    }
    s.affine("split.reduce", e, &[e, m * e, 1, 1]);
    s.norm("split.norm", e);
    for (j, &lambda) in cfg.lambda_schedule.iter().enumerate() {
        let b = block_prefix(j);
        s.norm(&format!("{b}.in_norm"), e);
        s.affine(&format!("{b}.ds"), q * e, &[q * e, 1, lambda]);
        s.norm(&format!("{b}.gru_norm"), e);
        s.gru(&format!("{b}.gru"), e, e);
        s.affine(&format!("{b}.fc"), e, &[e, e]);
        s.affine(&format!("{b}.mlp.proj_in"), 2 * e, &[2 * e, e]);
        s.norm(&format!("{b}.mlp.gate_norm"), e);
        s.affine(&format!("{b}.mlp.band_proj"), q, &[q, q]);
        s.affine(&format!("{b}.mlp.proj_out"), e, &[e, e]);
        s.affine(&format!("{b}.us"), e, &[e, e]);
        s.add(format!("{b}.us.zero_history"), &[q, e], Init::UniformFanIn);
    }
    let hm = cfg.merge_hidden();
    for (qi, &w) in cfg.band_layout().widths().iter().enumerate() {
        let b = format!("merge.q{qi:02}");
        s.norm(&format!("{b}.norm"), e);
        s.affine(&format!("{b}.fc1"), hm, &[hm, e]);
        s.affine(
            &format!("{b}.fc2"),
            INPUT_CHANNELS * w,
            &[INPUT_CHANNELS * w, hm],
        );
    }
    if cfg.postnet.enabled {
        let pn = &cfg.postnet;
        let hp = pn.hidden;
        s.affine("postnet.proj_in", hp, &[hp, cfg.bins() + q * e]);
        for l in 0..pn.gru_layers {
            s.gru(&format!("postnet.gru{l}"), hp, hp);
        }
        let bounds = group_bounds(cfg.deep_filter_outputs(), pn.groups);
        for g in 0..pn.groups {
            let n = bounds[g + 1] - bounds[g];
            s.affine(&format!("postnet.out.g{g}"), n, &[n, hp / pn.groups]);
        }
    }
    s.0
}

/// Convolution weight plus bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

/// Affine map, weight `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

impl LinearParams {
    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    #[inline]
    pub fn apply(&self, x: &[f32], out: &mut [f32]) {
        linear_into(self.weight.data(), Some(&self.bias), x, out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitParams {
    pub stem: ConvParams,
    /// `[region][scale]`.
    pub scales: Vec<Vec<ConvParams>>,
    pub reduce: ConvParams,
    pub norm: LayerNormParams,
    pub regions: Vec<RegionConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterbandParams {
    pub proj_in: LinearParams,
    pub gate_norm: LayerNormParams,
    pub band_proj: LinearParams,
    pub proj_out: LinearParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VrBlockParams {
    pub lambda: usize,
    pub in_norm: LayerNormParams,
    /// Depthwise `[Q*E, 1, lambda]` kernel over the merged channel axis.
    pub ds: ConvParams,
    pub gru_norm: LayerNormParams,
    pub gru: GruParams,
    pub fc: LinearParams,
    pub mlp: InterbandParams,
    pub us: LinearParams,
    /// Emitted before the first compressed frame completes, `[Q*E]`.
    pub zero_history: Vec<f32>,
}

impl VrBlockParams {
    pub fn embed(&self) -> usize {
        self.fc.out_dim()
    }

    pub fn bands(&self) -> usize {
        self.mlp.band_proj.out_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MergeBandParams {
    pub norm: LayerNormParams,
    pub fc1: LinearParams,
    pub fc2: LinearParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostnetParams {
    pub proj_in: LinearParams,
    pub grus: Vec<GruParams>,
    pub out_groups: Vec<LinearParams>,
    pub df_order: usize,
    pub bins: usize,
}

impl PostnetParams {
    pub fn hidden(&self) -> usize {
        self.proj_in.out_dim()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmruParams {
    pub split: SplitParams,
    pub blocks: Vec<VrBlockParams>,
    pub merge: Vec<MergeBandParams>,
    pub postnet: Option<PostnetParams>,
}

struct Fetch<'a> {
    store: &'a WeightStore,
    specs: std::collections::HashMap<String, Vec<usize>>,
}

impl Fetch<'_> {
    fn tensor(&self, name: &str) -> Result<Tensor> {
        let shape = self
            .specs
            .get(name)
            .ok_or_else(|| Error::Config(format!("no parameter named '{name}' in graph")))?;
        let t = self
            .store
            .get(name)
            .ok_or_else(|| Error::Format(format!("weight store is missing '{name}'")))?;
        if t.shape() != shape.as_slice() {
            return Err(shape_err!(
                "parameter '{name}' has shape {:?}, expected {:?}",
                t.shape(),
                shape
            ));
        }
        Ok(t.clone())
    }

    fn vec(&self, name: &str) -> Result<Vec<f32>> {
        Ok(self.tensor(name)?.into_data())
    }

    fn conv(&self, prefix: &str) -> Result<ConvParams> {
        Ok(ConvParams {
            weight: self.tensor(&format!("{prefix}.weight"))?,
            bias: self.vec(&format!("{prefix}.bias"))?,
        })
    }

    fn linear(&self, prefix: &str) -> Result<LinearParams> {
        Ok(LinearParams {
            weight: self.tensor(&format!("{prefix}.weight"))?,
            bias: self.vec(&format!("{prefix}.bias"))?,
        })
    }

    fn norm(&self, prefix: &str) -> Result<LayerNormParams> {
        LayerNormParams::new(
            self.vec(&format!("{prefix}.gain"))?,
            self.vec(&format!("{prefix}.bias"))?,
        )
    }

    fn gru(&self, prefix: &str, input: usize, hidden: usize) -> Result<GruParams> {
        GruParams::new(
            input,
            hidden,
            self.vec(&format!("{prefix}.w_ih"))?,
            self.vec(&format!("{prefix}.w_hh"))?,
            self.vec(&format!("{prefix}.b_ih"))?,
            self.vec(&format!("{prefix}.b_hh"))?,
        )
    }
}

impl SmruParams {
    /// Builds typed parameters, requiring the store to hold exactly the
    /// graph's parameters with matching shapes.
    pub fn from_store(cfg: &ModelConfig, store: &WeightStore) -> Result<Self> {
        let specs = parameter_specs(cfg);
        let expected: HashSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        if let Some(extra) = store.names().find(|n| !expected.contains(n)) {
            return Err(Error::Format(format!(
                "weight store has unexpected parameter '{extra}'"
            )));
        }
        let f = Fetch {
            store,
            specs: specs.into_iter().map(|s| (s.name, s.shape)).collect(),
        };
        let e = cfg.embed_dim;
        let split = SplitParams {
            stem: f.conv("split.stem")?,
            scales: (0..cfg.regions.len())
                .map(|p| {
                    (0..cfg.scales())
                        .map(|m| f.conv(&format!("split.r{p}.s{m}")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            reduce: f.conv("split.reduce")?,
            norm: f.norm("split.norm")?,
            regions: cfg
                .regions
                .iter()
                .map(|r| RegionConfig {
                    kernels: r.kernels[..cfg.scales()].to_vec(),
                    ..r.clone()
                })
                .collect(),
        };
        let mut blocks = Vec::with_capacity(cfg.num_blocks);
        for (j, &lambda) in cfg.lambda_schedule.iter().enumerate() {
            let b = block_prefix(j);
            blocks.push(VrBlockParams {
                lambda,
                in_norm: f.norm(&format!("{b}.in_norm"))?,
                ds: f.conv(&format!("{b}.ds"))?,
                gru_norm: f.norm(&format!("{b}.gru_norm"))?,
                gru: f.gru(&format!("{b}.gru"), e, e)?,
                fc: f.linear(&format!("{b}.fc"))?,
                mlp: InterbandParams {
                    proj_in: f.linear(&format!("{b}.mlp.proj_in"))?,
                    gate_norm: f.norm(&format!("{b}.mlp.gate_norm"))?,
                    band_proj: f.linear(&format!("{b}.mlp.band_proj"))?,
                    proj_out: f.linear(&format!("{b}.mlp.proj_out"))?,
                },
                us: f.linear(&format!("{b}.us"))?,
                zero_history: f.vec(&format!("{b}.us.zero_history"))?,
            });
        }
        let merge = (0..cfg.bands())
            .map(|q| {
                let b = format!("merge.q{q:02}");
                Ok(MergeBandParams {
                    norm: f.norm(&format!("{b}.norm"))?,
                    fc1: f.linear(&format!("{b}.fc1"))?,
                    fc2: f.linear(&format!("{b}.fc2"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let postnet = if cfg.postnet.enabled {
            let pn = &cfg.postnet;
            Some(PostnetParams {
                proj_in: f.linear("postnet.proj_in")?,
                grus: (0..pn.gru_layers)
                    .map(|l| f.gru(&format!("postnet.gru{l}"), pn.hidden, pn.hidden))
                    .collect::<Result<Vec<_>>>()?,
                out_groups: (0..pn.groups)
                    .map(|g| f.linear(&format!("postnet.out.g{g}")))
                    .collect::<Result<Vec<_>>>()?,
                df_order: pn.df_order,
                bins: cfg.bins(),
            })
        } else {
            None
        };
        Ok(Self {
            split,
            blocks,
            merge,
            postnet,
        })
    }
}
