use super::config::ModelConfig;
use super::params::SplitParams;
use super::{FeatureMap, InputStack};
use crate::error::{shape_err, Result};
use crate::tensor::{conv2d, layer_norm_into, Padding2d, Tensor};

/// Pointwise 8 → E convolution; `[8, T, F]` to `[E, T, F]`.
pub fn stem_conv(input: &InputStack, p: &SplitParams) -> Result<Tensor> {
    conv2d(
        input.tensor(),
        &p.stem.weight,
        Some(&p.stem.bias),
        (1, 1),
        Padding2d::default(),
        1,
    )
}

/// Multi-scale region split of a stem output `[E, T, F]` into `Q` band
/// embeddings, followed by the scale reduction and layer norm.
pub fn band_split(r: &Tensor, cfg: &ModelConfig, p: &SplitParams) -> Result<FeatureMap> {
    let mut h = band_split_prenorm(r, cfg, p)?;
    let e = h.embed();
    let mut buf = vec![0.0f32; e];
    for v in h.data_mut().chunks_exact_mut(e) {
        buf.copy_from_slice(v);
        layer_norm_into(&p.norm, &buf, v);
    }
    Ok(h)
}

/// [`band_split`] without the final normalization.
pub(crate) fn band_split_prenorm(
    r: &Tensor,
    cfg: &ModelConfig,
    p: &SplitParams,
) -> Result<FeatureMap> {
    r.expect_rank(3, "band split input")?;
    let (e, t, f) = (r.shape()[0], r.shape()[1], r.shape()[2]);
    if f != cfg.bins() {
        return Err(shape_err!(
            "band split expects {} bins, got {f}",
            cfg.bins()
        ));
    }
    if e != cfg.embed_dim {
        return Err(shape_err!(
            "band split expects {} channels, got {e}",
            cfg.embed_dim
        ));
    }
    let m = p.scales.first().map_or(0, Vec::len);
    let q_total = cfg.bands();
    // [M*E, T, Q] with regions laid side by side on the band axis.
    let mut stacked = vec![0.0f32; m * e * t * q_total];
    let mut bin0 = 0;
    let mut band0 = 0;
    for (region, convs) in p.regions.iter().zip(&p.scales) {
        let nb = region.bins;
        let qp = region.bands();
        let mut slice = vec![0.0f32; e * t * nb];
        for c in 0..e {
            for tt in 0..t {
                let src = (c * t + tt) * f + bin0;
                let dst = (c * t + tt) * nb;
                slice[dst..dst + nb].copy_from_slice(&r.data()[src..src + nb]);
            }
        }
        let slice = Tensor::from_vec(&[e, t, nb], slice)?;
        for (mi, conv) in convs.iter().enumerate() {
            let k = conv.weight.shape()[3];
            let out = conv2d(
                &slice,
                &conv.weight,
                Some(&conv.bias),
                (1, region.freq_stride),
                Padding2d::right(region.right_pad(k)),
                1,
            )?;
            debug_assert_eq!(out.shape(), &[e, t, qp]);
            for c in 0..e {
                for tt in 0..t {
                    let src = (c * t + tt) * qp;
                    let dst = ((mi * e + c) * t + tt) * q_total + band0;
                    stacked[dst..dst + qp].copy_from_slice(&out.data()[src..src + qp]);
                }
            }
        }
        bin0 += nb;
        band0 += qp;
    }
    let stacked = Tensor::from_vec(&[m * e, t, q_total], stacked)?;
    let reduced = conv2d(
        &stacked,
        &p.reduce.weight,
        Some(&p.reduce.bias),
        (1, 1),
        Padding2d::default(),
        1,
    )?;
    FeatureMap::from_channel_first(&reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Smru;
    use crate::tensor::SplitMix64;

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = SplitMix64::new(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.symmetric(1.0)).collect()).unwrap()
    }

    #[test]
    fn default_config_yields_sixteen_bands() {
        let cfg = ModelConfig::with_embed_dim(6).without_postnet();
        let model = Smru::seeded(cfg.clone(), 3).unwrap();
        let r = random(&[6, 4, 161], 1);
        let h = band_split(&r, &cfg, &model.params().split).unwrap();
        assert_eq!(h.dims(), (6, 4, 16));
    }

    #[test]
    fn zero_input_gives_normalized_bias() {
        let cfg = ModelConfig::with_embed_dim(5).without_postnet();
        let mut model = Smru::seeded(cfg.clone(), 9).unwrap();
        let sp = &mut model.params_mut().split;
        sp.norm.bias = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        for conv in sp.scales.iter_mut().flatten() {
            conv.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        sp.reduce.bias.iter_mut().for_each(|b| *b = 0.0);
        let r = Tensor::zeros(&[5, 3, 161]);
        let pre = band_split_prenorm(&r, &cfg, &model.params().split).unwrap();
        assert!(pre.data().iter().all(|&v| v == 0.0));
        let h = band_split(&r, &cfg, &model.params().split).unwrap();
        for v in h.data().chunks(5) {
            assert_eq!(v, &[0.1, 0.2, 0.3, 0.4, 0.5]);
        }
    }

    #[test]
    fn doubling_input_doubles_prenorm_without_biases() {
        let cfg = ModelConfig::with_embed_dim(4).without_postnet();
        let mut model = Smru::seeded(cfg.clone(), 5).unwrap();
        let sp = &mut model.params_mut().split;
        for conv in sp.scales.iter_mut().flatten() {
            conv.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        sp.reduce.bias.iter_mut().for_each(|b| *b = 0.0);
        let r = random(&[4, 3, 161], 2);
        let r2 =
            Tensor::from_vec(&[4, 3, 161], r.data().iter().map(|v| 2.0 * v).collect()).unwrap();
        let a = band_split_prenorm(&r, &cfg, &model.params().split).unwrap();
        let b = band_split_prenorm(&r2, &cfg, &model.params().split).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.0 * x - y).abs() <= 1e-5 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn stem_identity_and_zero_weights() {
        let cfg = ModelConfig::with_embed_dim(8).without_postnet();
        let mut model = Smru::seeded(cfg, 1).unwrap();
        let input = InputStack::from_tensor(random(&[8, 5, 161], 4)).unwrap();
        let stem = &mut model.params_mut().split.stem;
        stem.weight.data_mut().iter_mut().for_each(|w| *w = 0.0);
        for c in 0..8 {
            stem.weight.data_mut()[c * 8 + c] = 1.0;
        }
        stem.bias = vec![0.0; 8];
        let out = stem_conv(&input, &model.params().split).unwrap();
        assert_eq!(out.data(), input.tensor().data());

        let stem = &mut model.params_mut().split.stem;
        stem.weight.data_mut().iter_mut().for_each(|w| *w = 0.0);
        stem.bias = (0..8).map(|i| i as f32).collect();
        let out = stem_conv(&input, &model.params().split).unwrap();
        for c in 0..8 {
            assert!(out.data()[c * 5 * 161..(c + 1) * 5 * 161]
                .iter()
                .all(|&v| v == c as f32));
        }
    }

    #[test]
    fn stem_matches_naive_oracle() {
        let cfg = ModelConfig::with_embed_dim(3).without_postnet();
        let model = Smru::seeded(cfg, 11).unwrap();
        let input = InputStack::from_tensor(random(&[8, 2, 161], 8)).unwrap();
        let stem = &model.params().split.stem;
        let out = stem_conv(&input, &model.params().split).unwrap();
        for o in 0..3 {
            for t in 0..2 {
                for f in 0..161 {
                    let mut acc = stem.bias[o] as f64;
                    for c in 0..8 {
                        acc += stem.weight.data()[o * 8 + c] as f64
                            * input.tensor().data()[(c * 2 + t) * 161 + f] as f64;
                    }
                    let got = out.data()[(o * 2 + t) * 161 + f] as f64;
                    assert!((got - acc).abs() < 1e-5);
                }
            }
        }
    }
}
