//! Block- and metric-level checks against independent reference computations.

mod common;

use common::*;
use hifistream::blocks::mrf::{self, mrf2d_forward, mrf_forward};
use hifistream::blocks::{fms_masknet_forward, unet_masknet_forward, wave_unet};
use hifistream::config::{ConvDims, MaskNetConfig, MelConfig, ModelConfig, MrfSpec, UpsamplerSpec, Variant, WaveUNetSpec};
use hifistream::generator::{init_random, INIT_STD};
use hifistream::signal::{self, FrameConfig};
use hifistream::streaming::{process_stream, split};
use hifistream::weights::LayerDecl;
use hifistream::{kernels, metrics, oracle, ChunkPlan, ConvSpec, MaskMatrix, Model, RealTensor, WeightStore};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_store(r: &mut ChaCha8Rng, layers: &[LayerDecl], scale: f64) -> WeightStore<f64> {
    let mut store = WeightStore::new();
    for layer in layers {
        for (name, shape) in layer.tensors() {
            store.insert(name, uniform(r, &shape).map(|v| scale * v));
        }
    }
    store
}

fn lrelu(v: f64) -> f64 {
    if v >= 0.0 { v } else { 0.1 * v }
}

fn rows(t: &RealTensor<f64>) -> Vec<Vec<f64>> {
    (0..t.shape()[0]).map(|i| t.outer(i).to_vec()).collect()
}

fn tensor(rows: Vec<Vec<f64>>, tail: &[usize]) -> RealTensor<f64> {
    let mut shape = vec![rows.len()];
    shape.extend_from_slice(tail);
    RealTensor::new(shape, rows.into_iter().flatten().collect()).unwrap()
}

#[test]
fn sigmoid_matches_double_precision() {
    let mut r = rng(201);
    let x = uniform(&mut r, &[500]).map(|v| 20.0 * v);
    let fast = kernels::sigmoid(&x.cast::<f32>());
    for (&v, &s) in x.data().iter().zip(fast.data()) {
        let v32 = v as f32 as f64;
        let exact = 1.0 / (1.0 + (-v32).exp());
        assert!((s as f64 - exact).abs() <= 1e-7, "{v}: {s} vs {exact}");
    }
    let fast64 = kernels::sigmoid(&x);
    for (&v, &s) in x.data().iter().zip(fast64.data()) {
        assert!((s - 0.5 * (1.0 + (v / 2.0).tanh())).abs() <= 1e-15);
    }
}

#[test]
fn affine_matches_dot_products() {
    let mut r = rng(202);
    for _ in 0..20 {
        let (dout, d) = (r.random_range(1..9), r.random_range(1..12));
        let (x, w, b) = (uniform(&mut r, &[d]), uniform(&mut r, &[dout, d]), uniform(&mut r, &[dout]));
        let y = kernels::affine(&x.cast::<f32>(), &w.cast(), &b.cast()).unwrap();
        for i in 0..dout {
            let expect: f64 = (0..d).map(|j| w.data()[i * d + j] * x.data()[j]).sum::<f64>() + b.data()[i];
            assert!((y.data()[i] as f64 - expect).abs() <= 1e-6);
        }
    }
}

#[test]
fn bin_centered_sine_concentrates_energy() {
    let cfg = FrameConfig::default();
    for k in [5usize, 37, 200, 480] {
        let f = k as f64 * 16000.0 / 1024.0;
        let x: Vec<f64> = (0..8000).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / 16000.0 + 0.3).sin()).collect();
        let s = signal::stft(&audio(x), &cfg).unwrap();
        // edge frames see reflect padding rather than the sine itself
        for m in 2..s.frames() - 2 {
            let total: f64 = (0..s.bins()).map(|b| s.at(b, m).norm_sqr()).sum();
            let near: f64 = (k - 1..=k + 1).map(|b| s.at(b, m).norm_sqr()).sum();
            assert!(near >= 0.95 * total, "k={k} frame {m}: {:.4}", near / total);
        }
    }
}

#[test]
fn frames_satisfy_parseval() {
    let cfg = FrameConfig::default();
    let (n_fft, hop) = (cfg.n_fft(), cfg.hop());
    let window: Vec<f64> = cfg.window();
    let mut r = rng(203);
    let x = noise(&mut r, 7000, 1.0);
    let s = signal::stft(&audio(x.clone()), &cfg).unwrap();
    let n = x.len() as isize;
    let reflect = |i: isize| if i < 0 { -i } else if i >= n { 2 * (n - 1) - i } else { i } as usize;
    for m in 0..s.frames() {
        let energy: f64 = (0..n_fft)
            .map(|i| (window[i] * x[reflect((m * hop + i) as isize - (n_fft / 2) as isize)]).powi(2))
            .sum();
        // one-sided spectrum: interior bins stand for two full-spectrum bins
        let spectrum: f64 = (0..s.bins())
            .map(|b| s.at(b, m).norm_sqr() * if b == 0 || b == s.bins() - 1 { 1.0 } else { 2.0 })
            .sum();
        assert!((energy - spectrum / n_fft as f64).abs() <= 1e-4 * energy, "frame {m}");
    }
}

#[test]
fn istft_is_linear() {
    let cfg = FrameConfig::default();
    let mut r = rng(204);
    let mut masked = || {
        let s = signal::stft(&audio(noise(&mut r, 6000, 1.0)), &cfg).unwrap();
        let m = MaskMatrix::new(s.bins(), s.frames(), (0..s.bins() * s.frames()).map(|i| (i % 7) as f64 / 6.0).collect()).unwrap();
        signal::apply_mask(&s, &m).unwrap()
    };
    let (s1, s2) = (masked(), masked());
    let (a, b) = (0.8, -2.5);
    let lhs = signal::istft(&s1.linear_combination(a, &s2, b).unwrap(), 16000).unwrap();
    let (y1, y2) = (signal::istft(&s1, 16000).unwrap(), signal::istft(&s2, 16000).unwrap());
    for ((l, p), q) in lhs.samples().iter().zip(y1.samples()).zip(y2.samples()) {
        assert!((l - (a * p + b * q)).abs() <= 1e-5);
    }
}

#[test]
fn mel_bank_covers_the_band_interior() {
    let cfg = FrameConfig::default();
    for (f_min, f_max) in [(0.0, 8000.0), (80.0, 7600.0)] {
        let bank = signal::mel_filterbank::<f64>(cfg.bins(), 80, 16000, f_min, f_max).unwrap();
        let bin_hz = 8000.0 / (cfg.bins() - 1) as f64;
        for k in 0..cfg.bins() {
            let f = k as f64 * bin_hz;
            let total: f64 = (0..80).map(|m| bank.data()[m * cfg.bins() + k]).sum();
            if f > f_min && f < f_max {
                assert!(total > 0.0, "bin {k} ({f} Hz) uncovered");
            } else if f < f_min || f > f_max {
                assert_eq!(total, 0.0, "bin {k} ({f} Hz)");
            }
        }
    }
}

#[test]
fn mel_projection_matches_matrix_product() {
    let cfg = FrameConfig::default();
    let mut r = rng(205);
    let s = signal::stft(&audio(noise(&mut r, 9000, 1.0)), &cfg).unwrap();
    let bank = signal::mel_filterbank::<f64>(cfg.bins(), 80, 16000, 0.0, 8000.0).unwrap();
    let mel = signal::mel_spectrogram(&s, &bank).unwrap();
    for m in 0..80 {
        for t in 0..s.frames() {
            let acc: f64 = (0..s.bins()).map(|b| bank.data()[m * s.bins() + b] * s.at(b, t).norm()).sum();
            assert!((mel.data()[m * s.frames() + t] - acc.ln_1p()).abs() <= 1e-5);
        }
    }
}

#[test]
fn corrupt_matches_direct_convolution() {
    let mut r = rng(206);
    for _ in 0..10 {
        let n = r.random_range(1..400);
        let taps = r.random_range(1..30);
        let (x, f, e) = (noise(&mut r, n, 1.0), noise(&mut r, taps, 1.0), noise(&mut r, n, 0.1));
        let y = signal::corrupt(&audio(x.clone()), &RealTensor::vector(f.clone()).unwrap(), &audio(e.clone())).unwrap();
        for t in 0..n {
            let mut acc = e[t];
            for (j, fj) in f.iter().enumerate() {
                if j <= t {
                    acc += fj * x[t - j];
                }
            }
            assert!((y.samples()[t] - acc).abs() <= 1e-6);
        }
    }
}

#[test]
fn masknets_preserve_grid_shape() {
    let mut r = rng(207);
    for cfg in [MaskNetConfig::fms(), MaskNetConfig::unet()] {
        let store = random_store(&mut r, &hifistream::blocks::masknet::layers(&cfg), 0.3);
        for _ in 0..12 {
            let (f, m) = (r.random_range(1..90), r.random_range(1..40));
            let feats = uniform(&mut r, &[1, f, m]).map(f64::abs);
            let mask = match cfg {
                MaskNetConfig::Fms { .. } => fms_masknet_forward(&feats, &cfg, &store),
                MaskNetConfig::Unet { .. } => unet_masknet_forward(&feats, &cfg, &store),
            }
            .unwrap();
            assert_eq!((mask.bins(), mask.frames()), (f, m), "{cfg:?}");
        }
    }
}

fn small_mrf(dims: ConvDims) -> MrfSpec {
    MrfSpec { dims, kernels: vec![3, 5], dilations: vec![vec![1, 2], vec![1, 3]], channels: 3 }
}

#[test]
fn mrf_1d_matches_composed_convolutions() {
    let mut r = rng(208);
    let spec = small_mrf(ConvDims::One);
    let store = random_store(&mut r, &mrf::layers("m", &spec), 0.4);
    let x = uniform(&mut r, &[3, 41]);
    let fast = mrf_forward(&x, &spec, &store, "m").unwrap();

    let conv = |name: &str, s: &ConvSpec, h: &[Vec<f64>]| {
        let inp = tensor(h.iter().map(|row| row.iter().map(|&v| lrelu(v)).collect()).collect(), &[h[0].len()]);
        oracle::conv1d(&inp, s, store.get(&format!("{name}.weight")).unwrap(), store.get(&format!("{name}.bias")))
    };
    let mut sum = vec![vec![0.0; 41]; 3];
    for (b, dils) in spec.dilations.iter().enumerate() {
        let k = spec.kernels[b];
        let mut h = rows(&x);
        for (j, &d) in dils.iter().enumerate() {
            let t = conv(&format!("m.{b}.{j}.conv1"), &ConvSpec::conv1d(3, 3, k).dilation(&[d]).same(), &h);
            let t = conv(&format!("m.{b}.{j}.conv2"), &ConvSpec::conv1d(3, 3, k).same(), &t);
            for (hr, tr) in h.iter_mut().zip(&t) {
                hr.iter_mut().zip(tr).for_each(|(a, b)| *a += b);
            }
        }
        for (sr, hr) in sum.iter_mut().zip(&h) {
            sr.iter_mut().zip(hr).for_each(|(a, b)| *a += b / 2.0);
        }
    }
    let err = max_abs_diff(fast.data().iter().copied(), sum.into_iter().flatten());
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn mrf_2d_matches_composed_convolutions() {
    let mut r = rng(209);
    let spec = small_mrf(ConvDims::Two);
    let store = random_store(&mut r, &mrf::layers("m", &spec), 0.3);
    let (h_, w_) = (6, 19);
    let x = uniform(&mut r, &[3, h_, w_]);
    let fast = mrf2d_forward(&x, &spec, &store, "m").unwrap();

    let conv = |name: &str, s: &ConvSpec, h: &[Vec<f64>]| {
        let inp = tensor(h.iter().map(|row| row.iter().map(|&v| lrelu(v)).collect()).collect(), &[h_, w_]);
        let (out, ho, wo) = oracle::conv2d(&inp, s, store.get(&format!("{name}.weight")).unwrap(), store.get(&format!("{name}.bias")));
        assert_eq!((ho, wo), (h_, w_));
        out
    };
    let mut sum = vec![vec![0.0; h_ * w_]; 3];
    for (b, dils) in spec.dilations.iter().enumerate() {
        let k = spec.kernels[b];
        let mut h = rows(&x);
        for (j, &d) in dils.iter().enumerate() {
            let t = conv(&format!("m.{b}.{j}.conv1"), &ConvSpec::conv2d(3, 3, [k, k]).dilation(&[1, d]).same(), &h);
            let t = conv(&format!("m.{b}.{j}.conv2"), &ConvSpec::conv2d(3, 3, [k, k]).same(), &t);
            for (hr, tr) in h.iter_mut().zip(&t) {
                hr.iter_mut().zip(tr).for_each(|(a, b)| *a += b);
            }
        }
        for (sr, hr) in sum.iter_mut().zip(&h) {
            sr.iter_mut().zip(hr).for_each(|(a, b)| *a += b / 2.0);
        }
    }
    let err = max_abs_diff(fast.data().iter().copied(), sum.into_iter().flatten());
    assert!(err <= 1e-5, "{err}");
}

#[test]
fn wave_unet_matches_composed_kernels() {
    let mut r = rng(210);
    let spec = WaveUNetSpec { widths: vec![4, 6, 8], kernel: 5, lrelu_slope: 0.1 };
    let store = random_store(&mut r, &wave_unet::layers(3, &spec), 0.4);
    let len = 37;
    let x = uniform(&mut r, &[3, len]);
    let fast = hifistream::blocks::wave_unet_forward(&x, &spec, &store).unwrap();

    let w = |n: &str| store.get(&format!("{n}.weight")).unwrap();
    let b = |n: &str| store.get(&format!("{n}.bias"));
    let act = |h: Vec<Vec<f64>>| -> Vec<Vec<f64>> { h.into_iter().map(|r| r.into_iter().map(lrelu).collect()).collect() };
    let conv = |n: &str, cin: usize, cout: usize, h: &[Vec<f64>]| {
        oracle::conv1d(&tensor(h.to_vec(), &[h[0].len()]), &ConvSpec::conv1d(cin, cout, 5).same(), w(n), b(n))
    };
    let resample = |cin, cout| ConvSpec::conv1d(cin, cout, 4).stride(&[2]).padding(&[1]);

    // padded to a multiple of 2^depth = 4
    let mut h: Vec<Vec<f64>> = rows(&x).into_iter().map(|mut row| { row.resize(40, 0.0); row }).collect();
    h = act(conv("waveunet.in", 3, 4, &h));
    let wd = &spec.widths;
    let mut skips = Vec::new();
    for i in 0..2 {
        h = act(conv(&format!("waveunet.enc{i}"), wd[i], wd[i], &h));
        skips.push(h.clone());
        let n = format!("waveunet.down{i}");
        h = act(oracle::conv1d(&tensor(h.clone(), &[h[0].len()]), &resample(wd[i], wd[i + 1]), w(&n), b(&n)));
    }
    h = act(conv("waveunet.bottleneck", 8, 8, &h));
    for i in (0..2).rev() {
        let n = format!("waveunet.up{i}");
        h = act(oracle::conv_transpose1d(&tensor(h.clone(), &[h[0].len()]), &resample(wd[i + 1], wd[i]), w(&n), b(&n)));
        h.extend(skips[i].iter().cloned());
        h = act(conv(&format!("waveunet.dec{i}"), 2 * wd[i], wd[i], &h));
    }
    let out = oracle::conv1d(&tensor(h, &[40]), &ConvSpec::conv1d(4, 1, 1), w("waveunet.out"), b("waveunet.out"));
    let expect: Vec<f64> = (0..len).map(|t| out[0][t] + x.data()[t]).collect();
    assert_eq!(fast.shape(), &[1, len]);
    let err = max_abs_diff(fast.data().iter().copied(), expect);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn default_upsampling_matches_hop() {
    let up = UpsamplerSpec::default();
    assert_eq!(up.rates.iter().product::<usize>(), 256);
    assert_eq!(up.total_rate(), FrameConfig::default().hop());
}

#[test]
fn initial_weights_are_centered() {
    for v in Variant::ALL {
        let store = init_random::<f64>(&ModelConfig::for_variant(v), 17).unwrap();
        for (name, t) in store.iter() {
            let n = t.len() as f64;
            let mean = t.data().iter().sum::<f64>() / n;
            assert!(mean.abs() <= 5.0 * INIT_STD / n.sqrt(), "{v} {name}: mean {mean}");
        }
    }
}

#[test]
fn chunk_order_does_not_matter() {
    let model = Model::random(ModelConfig::for_variant(Variant::HifiStream2d), 8).unwrap();
    let mut r = rng(211);
    let x = audio32(&noise(&mut r, 15000, 0.5));
    let plan = ChunkPlan::default();
    let chunks = split(&x, &plan);
    let mut outs: Vec<(usize, Vec<f32>)> = chunks.iter().enumerate().rev().map(|(i, c)| (i, model.enhance(c).unwrap().into_samples())).collect();
    outs.sort_by_key(|(i, _)| *i);
    let joined: Vec<f32> = outs.into_iter().flat_map(|(_, s)| s).collect();
    let streamed = process_stream(&model, &x, &plan).unwrap();
    assert!(joined.iter().zip(streamed.samples()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

/// `10 log10(|b x|^2 / |e - b x|^2)` with `b` found by refining grid search on
/// the residual energy.
fn si_sdr_by_search(x: &[f64], e: &[f64]) -> f64 {
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| a - m).collect::<Vec<_>>()
    };
    let (x, e) = (center(x), center(e));
    let residual = |beta: f64| x.iter().zip(&e).map(|(a, b)| (b - beta * a).powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (-10.0, 10.0);
    let mut best = 0.0;
    for _ in 0..8 {
        let step = (hi - lo) / 200.0;
        best = (0..=200).map(|i| lo + step * i as f64).min_by(|a, b| residual(*a).total_cmp(&residual(*b))).unwrap();
        lo = best - step;
        hi = best + step;
    }
    let target: f64 = x.iter().map(|a| (best * a).powi(2)).sum();
    10.0 * (target / residual(best)).log10()
}

#[test]
fn si_sdr_matches_grid_search() {
    let mut r = rng(212);
    for _ in 0..10 {
        let x = tone(4000, 16000);
        let gain = r.random_range(0.2..3.0);
        let amp = r.random_range(0.05..1.0);
        let e: Vec<f64> = x.iter().zip(noise(&mut r, 4000, amp)).map(|(a, n)| gain * a + n).collect();
        let fast = metrics::si_sdr(&audio(x.clone()), &audio(e.clone())).unwrap().value;
        let slow = si_sdr_by_search(&x, &e);
        assert!((fast - slow).abs() <= 1e-3, "{fast} vs {slow}");
    }
}

#[test]
fn stoi_near_one_at_forty_db() {
    // broadband, syllable-rate modulated: a sparse tone would leave most
    // one-third octave bands to the noise alone
    let mut r = rng(213);
    let x: Vec<f64> = noise(&mut r, 24000, 1.0)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v * (0.2 + (2.0 * std::f64::consts::PI * 4.0 * i as f64 / 16000.0).sin().abs()))
        .collect();
    let p = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    // uniform noise on [-a, a] has power a^2 / 3
    let a = (3.0 * p * 1e-4).sqrt();
    let y: Vec<f64> = x.iter().zip(noise(&mut r, x.len(), a)).map(|(s, n)| s + n).collect();
    let v = metrics::stoi(&audio(x), &audio(y)).unwrap();
    assert!(v > 0.9 && v <= 1.0, "{v}");
}

#[test]
fn mel_loss_matches_elementwise_reference() {
    let mut r = rng(214);
    let x = noise(&mut r, 5000, 0.5);
    let y: Vec<f64> = x.iter().zip(noise(&mut r, 5000, 0.2)).map(|(a, b)| a + b).collect();
    let frame = FrameConfig::default();
    let mel = MelConfig::default();
    let fast = metrics::mel_l1_loss(&audio(x.clone()), &audio(y.clone()), &frame, &mel).unwrap();

    let bank = signal::mel_filterbank::<f64>(frame.bins(), 80, 16000, 0.0, 8000.0).unwrap();
    let logmel = |s: &[f64]| -> Vec<f64> {
        let spec = oracle::stft(s, 1024, 256);
        let mut out = Vec::new();
        for m in 0..80 {
            for frame in &spec {
                let acc: f64 = frame.iter().enumerate().map(|(b, c)| bank.data()[m * 513 + b] * c.norm()).sum();
                out.push(acc.ln_1p());
            }
        }
        out
    };
    let (a, b) = (logmel(&x), logmel(&y));
    let slow = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64;
    assert!((fast - slow).abs() <= 1e-6, "{fast} vs {slow}");
}
