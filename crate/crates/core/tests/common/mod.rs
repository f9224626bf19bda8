#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex32;
use smru_core::model::{smru_forward, DeepFilterCoeffs, Smru};
use smru_core::signal::Spectrogram;
use smru_core::tensor::{Padding2d, SplitMix64, Tensor};

pub fn random_tensor(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.symmetric(1.0)).collect()).unwrap()
}

pub fn random_spec(frames: usize, bins: usize, rng: &mut SplitMix64) -> Spectrogram {
    Spectrogram::from_vec(
        frames,
        bins,
        (0..frames * bins)
            .map(|_| Complex32::new(rng.symmetric(1.0), rng.symmetric(1.0)))
            .collect(),
    )
    .unwrap()
}

/// Perturbs frames `>= t0` of all four inputs and checks that output frames
/// `< t0` are bit-identical. Returns a description of the first violation.
pub fn causality_sweep(
    model: &Smru,
    frames: usize,
    positions: usize,
    seed: u64,
) -> Result<(), String> {
    let mut rng = SplitMix64::new(seed);
    let bins = model.config().bins();
    let inputs: Vec<Spectrogram> = (0..4)
        .map(|_| random_spec(frames, bins, &mut rng))
        .collect();
    let base = smru_forward(model, &inputs[0], &inputs[1], &inputs[2], &inputs[3])
        .map_err(|e| e.to_string())?;
    for _ in 0..positions {
        let t0 = 1 + (rng.next_u64() % (frames as u64 - 1)) as usize;
        let mut pert = inputs.clone();
        for s in &mut pert {
            for t in t0..frames {
                for v in s.row_mut(t) {
                    *v += Complex32::new(rng.symmetric(2.0), rng.symmetric(2.0));
                }
            }
        }
        let out = smru_forward(model, &pert[0], &pert[1], &pert[2], &pert[3])
            .map_err(|e| e.to_string())?;
        for t in 0..t0 {
            if out.row(t) != base.row(t) {
                return Err(format!(
                    "perturbation at frame {t0} changed output frame {t}"
                ));
            }
        }
        if out.row(t0) == base.row(t0) {
            return Err(format!("perturbation at frame {t0} had no effect at {t0}"));
        }
    }
    Ok(())
}

pub fn conv2d_naive(
    x: &Tensor,
    w: &Tensor,
    b: &[f32],
    stride: (usize, usize),
    pad: Padding2d,
    groups: usize,
) -> Vec<f64> {
    let (cin, t, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, cig, kt, kf) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let to = (t + pad.top + pad.bottom - kt) / stride.0 + 1;
    let fo = (f + pad.left + pad.right - kf) / stride.1 + 1;
    let cog = cout / groups;
    assert_eq!(cin / groups, cig);
    let at = |c: usize, ti: isize, fi: isize| -> f64 {
        if ti < 0 || fi < 0 || ti >= t as isize || fi >= f as isize {
            0.0
        } else {
            x.data()[(c * t + ti as usize) * f + fi as usize] as f64
        }
    };
    let mut out = Vec::with_capacity(cout * to * fo);
    for co in 0..cout {
        let g = co / cog;
        for ot in 0..to {
            for of in 0..fo {
                let mut acc = b[co] as f64;
                for ci in 0..cig {
                    for dt in 0..kt {
                        for df in 0..kf {
                            let wv = w.data()[((co * cig + ci) * kt + dt) * kf + df] as f64;
                            acc += wv
                                * at(
                                    g * cig + ci,
                                    (ot * stride.0 + dt) as isize - pad.top as isize,
                                    (of * stride.1 + df) as isize - pad.left as isize,
                                );
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn conv1d_naive(x: &Tensor, w: &Tensor, b: &[f32], stride: usize, groups: usize) -> Vec<f64> {
    let (cin, t) = (x.shape()[0], x.shape()[1]);
    let (cout, cig, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let to = t / stride;
    let cog = cout / groups;
    assert_eq!(cin / groups, cig);
    let mut out = Vec::new();
    for co in 0..cout {
        let g = co / cog;
        for j in 0..to {
            let mut acc = b[co] as f64;
            for ci in 0..cig {
                for tau in 0..k {
                    acc += w.data()[(co * cig + ci) * k + tau] as f64
                        * x.data()[(g * cig + ci) * t + j * stride + tau] as f64;
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn linear_naive(x: &[f32], w: &[f32], b: &[f32]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| {
            bo as f64
                + (0..n_in)
                    .map(|i| w[o * n_in + i] as f64 * x[i] as f64)
                    .sum::<f64>()
        })
        .collect()
}

/// GRU over a sequence in f64, PyTorch gate order (r, z, n).
pub fn gru_naive(
    xs: &[Vec<f32>],
    h0: &[f32],
    w_ih: &[f32],
    w_hh: &[f32],
    b_ih: &[f32],
    b_hh: &[f32],
) -> Vec<Vec<f64>> {
    let hd = h0.len();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut h: Vec<f64> = h0.iter().map(|&v| v as f64).collect();
    let mut out = Vec::new();
    for x in xs {
        let gi = linear_naive(x, w_ih, b_ih);
        let hh: Vec<f64> = (0..3 * hd)
            .map(|o| b_hh[o] as f64 + (0..hd).map(|i| w_hh[o * hd + i] as f64 * h[i]).sum::<f64>())
            .collect();
        let mut next = vec![0.0; hd];
        for k in 0..hd {
            let r = sig(gi[k] + hh[k]);
            let z = sig(gi[hd + k] + hh[hd + k]);
            let n = (gi[2 * hd + k] + r * hh[2 * hd + k]).tanh();
            next[k] = (1.0 - z) * n + z * h[k];
        }
        h = next;
        out.push(h.clone());
    }
    out
}

pub fn deep_filter_naive(s: &Spectrogram, c: &DeepFilterCoeffs) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for t in 0..s.frames() {
        for f in 0..s.bins() {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for l in 0..c.order() {
                if t < l {
                    continue;
                }
                let a = c.taps(t, f)[l];
                let b = s.get(t - l, f);
                re += a.re as f64 * b.re as f64 - a.im as f64 * b.im as f64;
                im += a.re as f64 * b.im as f64 + a.im as f64 * b.re as f64;
            }
            out.push((re, im));
        }
    }
    out
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).abs())
        .fold(0.0, f64::max)
}

fn pick(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// Worst absolute error of `conv2d` against the oracle over random cases.
pub fn conv2d_oracle_error(instances: usize, seed: u64) -> f64 {
    use smru_core::tensor::conv2d;
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let groups = pick(&mut rng, 1, 2);
        let cig = pick(&mut rng, 1, 3);
        let cog = pick(&mut rng, 1, 3);
        let (kt, kf) = (pick(&mut rng, 1, 2), pick(&mut rng, 1, 4));
        let (t, f) = (pick(&mut rng, kt, 6), pick(&mut rng, kf, 12));
        let stride = (pick(&mut rng, 1, 2), pick(&mut rng, 1, 3));
        let pad = Padding2d {
            top: pick(&mut rng, 0, 1),
            bottom: 0,
            left: pick(&mut rng, 0, 1),
            right: pick(&mut rng, 0, 2),
        };
        let x = random_tensor(&[groups * cig, t, f], &mut rng);
        let w = random_tensor(&[groups * cog, cig, kt, kf], &mut rng);
        let b: Vec<f32> = (0..groups * cog).map(|_| rng.symmetric(1.0)).collect();
        let got = conv2d(&x, &w, Some(&b), stride, pad, groups).unwrap();
        let want = conv2d_naive(&x, &w, &b, stride, pad, groups);
        assert_eq!(got.len(), want.len());
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

pub fn conv1d_oracle_error(instances: usize, seed: u64) -> f64 {
    use smru_core::tensor::causal_conv1d_time;
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let groups = pick(&mut rng, 1, 3);
        let cig = pick(&mut rng, 1, 2);
        let cog = pick(&mut rng, 1, 2);
        let k = [1usize, 2, 4, 8][pick(&mut rng, 0, 3)];
        let t = pick(&mut rng, 0, 40);
        let x = random_tensor(&[groups * cig, t], &mut rng);
        let w = random_tensor(&[groups * cog, cig, k], &mut rng);
        let b: Vec<f32> = (0..groups * cog).map(|_| rng.symmetric(1.0)).collect();
        let got = causal_conv1d_time(&x, &w, Some(&b), k, groups).unwrap();
        let want = conv1d_naive(&x, &w, &b, k, groups);
        assert_eq!(got.len(), want.len());
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

pub fn linear_oracle_error(instances: usize, seed: u64) -> f64 {
    use smru_core::tensor::linear;
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (rows, n_in, n_out) = (
            pick(&mut rng, 1, 5),
            pick(&mut rng, 1, 12),
            pick(&mut rng, 1, 8),
        );
        let x = random_tensor(&[rows, n_in], &mut rng);
        let w = random_tensor(&[n_out, n_in], &mut rng);
        let b: Vec<f32> = (0..n_out).map(|_| rng.symmetric(1.0)).collect();
        let got = linear(&x, &w, Some(&b)).unwrap();
        let mut want = Vec::new();
        for r in 0..rows {
            want.extend(linear_naive(
                &x.data()[r * n_in..(r + 1) * n_in],
                w.data(),
                &b,
            ));
        }
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

pub fn gru_oracle_error(instances: usize, seed: u64) -> f64 {
    use smru_core::tensor::{gru_forward, GruParams};
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (i, h, t) = (
            pick(&mut rng, 1, 6),
            pick(&mut rng, 1, 6),
            pick(&mut rng, 1, 12),
        );
        let mut v = |n: usize| (0..n).map(|_| rng.symmetric(1.0)).collect::<Vec<f32>>();
        let p = GruParams::new(i, h, v(3 * h * i), v(3 * h * h), v(3 * h), v(3 * h)).unwrap();
        let h0 = v(h);
        let xs: Vec<Vec<f32>> = (0..t).map(|_| v(i)).collect();
        let flat: Vec<f32> = xs.iter().flatten().copied().collect();
        let got = gru_forward(&p, &Tensor::from_vec(&[t, i], flat).unwrap(), &h0).unwrap();
        let want: Vec<f64> = gru_naive(&xs, &h0, &p.w_ih, &p.w_hh, &p.b_ih, &p.b_hh)
            .into_iter()
            .flatten()
            .collect();
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

pub fn deep_filter_oracle_error(instances: usize, seed: u64) -> f64 {
    use smru_core::model::deep_filter;
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (t, f, l) = (
            pick(&mut rng, 1, 10),
            pick(&mut rng, 1, 20),
            pick(&mut rng, 1, 5),
        );
        let s = random_spec(t, f, &mut rng);
        let mut c = DeepFilterCoeffs::zeros(t, f, l);
        for tt in 0..t {
            for ff in 0..f {
                for tap in c.taps_mut(tt, ff) {
                    *tap = Complex32::new(rng.symmetric(1.0), rng.symmetric(1.0));
                }
            }
        }
        let got = deep_filter(&s, &c).unwrap();
        for (g, (re, im)) in got.data().iter().zip(deep_filter_naive(&s, &c)) {
            worst = worst
                .max((g.re as f64 - re).abs())
                .max((g.im as f64 - im).abs());
        }
    }
    worst
}
