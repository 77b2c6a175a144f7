//! One PASS/FAIL/SKIP line per acceptance criterion. Run with
//! `cargo test -p hifistream --test acceptance -- --nocapture` to see the table.
//!
//! Dataset criteria run only when `HIFISTREAM_CLEAN_DIR` and `HIFISTREAM_NOISY_DIR`
//! point at paired test folders; the checkpoint criterion also needs
//! `HIFISTREAM_CHECKPOINT` (an HFSW file) and `HIFISTREAM_CONFIG` (its TOML).

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use common::*;
use hifistream::blocks::fms::scaling_coefficients;
use hifistream::blocks::{fms_forward, fms_masknet_forward, unet_masknet_forward, FmsParams};
use hifistream::config::{MaskNetConfig, ModelConfig, Variant};
use hifistream::generator::init_random;
use hifistream::io::{self, EvalManifest};
use hifistream::profiler::{self, count_params, total_params, verify_counts};
use hifistream::signal::{self, FrameConfig};
use hifistream::streaming::{process_stream, split};
use hifistream::{kernels, metrics, oracle, AudioBuffer, ChunkPlan, MaskMatrix, Model, Weights};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

enum Status {
    Pass,
    Fail,
    Skip,
}

fn stft_round_trip() -> Outcome {
    let cfg = FrameConfig::default();
    let mut r = rng(1001);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1000..=80000);
        let a = audio32(&noise(&mut r, n, 1.0));
        let back = signal::istft(&signal::stft(&a, &cfg).map_err(|e| e.to_string())?, 16000).map_err(|e| e.to_string())?;
        ensure!(back.len() == n, "length {} -> {}", n, back.len());
        let x: Vec<f64> = a.samples().iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = back.samples().iter().map(|&v| v as f64).collect();
        worst = worst.max(rel_l2(&x, &y));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-5, "worst relative L2 {worst:.2e}");
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("worst rel L2 {worst:.2e}, {secs:.2} s"))
}

fn kernel_oracles() -> Outcome {
    let mut r = rng(1002);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (spec, len) = random_conv1d(&mut r);
        let x = uniform(&mut r, &[spec.in_channels, len]).cast::<f32>();
        let w = uniform(&mut r, &spec.weight_shape()).cast::<f32>();
        let b = uniform(&mut r, &[spec.out_channels]).cast::<f32>();
        let fast = kernels::conv1d(&x, &spec, &w, Some(&b)).map_err(|e| e.to_string())?;
        let slow = oracle::conv1d(&x.cast(), &spec, &w.cast(), Some(&b.cast()));
        worst = worst.max(max_abs_diff(fast.data().iter().map(|&v| v as f64), slow.into_iter().flatten()));

        let (spec, [h, wd]) = random_conv2d(&mut r);
        let x = uniform(&mut r, &[spec.in_channels, h, wd]).cast::<f32>();
        let w = uniform(&mut r, &spec.weight_shape()).cast::<f32>();
        let b = uniform(&mut r, &[spec.out_channels]).cast::<f32>();
        let fast = kernels::conv2d(&x, &spec, &w, Some(&b)).map_err(|e| e.to_string())?;
        let (slow, _, _) = oracle::conv2d(&x.cast(), &spec, &w.cast(), Some(&b.cast()));
        worst = worst.max(max_abs_diff(fast.data().iter().map(|&v| v as f64), slow.into_iter().flatten()));

        let (spec, len) = random_transposed(&mut r);
        let x = uniform(&mut r, &[spec.in_channels, len]).cast::<f32>();
        let w = uniform(&mut r, &spec.transposed_weight_shape()).cast::<f32>();
        let b = uniform(&mut r, &[spec.out_channels]).cast::<f32>();
        let fast = kernels::conv_transpose1d(&x, &spec, &w, Some(&b)).map_err(|e| e.to_string())?;
        let slow = oracle::conv_transpose1d(&x.cast(), &spec, &w.cast(), Some(&b.cast()));
        worst = worst.max(max_abs_diff(fast.data().iter().map(|&v| v as f64), slow.into_iter().flatten()));
    }
    ensure!(worst <= 1e-5, "max abs error {worst:.2e}");

    let mut adj: f64 = 0.0;
    for _ in 0..200 {
        let (spec, len) = random_transposed(&mut r);
        let fwd = oracle::adjoint_spec(&spec);
        let w = uniform(&mut r, &spec.transposed_weight_shape()).cast::<f32>();
        let y = uniform(&mut r, &[spec.in_channels, len]).cast::<f32>();
        let ty = kernels::conv_transpose1d(&y, &spec.clone().without_bias(), &w, None).map_err(|e| e.to_string())?;
        let x = uniform(&mut r, &[spec.out_channels, ty.shape()[1]]).cast::<f32>();
        let cx = kernels::conv1d(&x, &fwd, &w, None).map_err(|e| e.to_string())?;
        let lhs = hifistream::tensor::dot(cx.data(), y.data());
        let rhs = hifistream::tensor::dot(x.data(), ty.data());
        adj = adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    ensure!(adj <= 1e-4, "adjoint mismatch {adj:.2e}");
    Ok(format!("max abs error {worst:.2e}, adjoint {adj:.2e}"))
}

fn fms_law() -> Outcome {
    let mut r = rng(1003);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (f, t) = (r.random_range(1..40), r.random_range(1..40));
        let c = uniform(&mut r, &[f, t]).map(|v| 3.0 * v);
        let p = FmsParams::scalar(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let y = fms_forward(&c, &p).map_err(|e| e.to_string())?;
        let s = scaling_coefficients(&c.clone().reshape(&[1, f, t]).map_err(|e| e.to_string())?, &p).map_err(|e| e.to_string())?;
        ensure!(s.iter().all(|&g| g > 0.0 && g < 1.0), "gate outside (0, 1)");
        for i in 0..f {
            for j in 0..t {
                let v = c.data()[i * t + j];
                worst = worst.max((y.data()[i * t + j] - v * (1.0 + s[j])).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "max deviation {worst:.2e}");
    let c = uniform(&mut r, &[17, 23]).cast::<f32>();
    let y = fms_forward(&c, &FmsParams::scalar(0.0, 0.0)).map_err(|e| e.to_string())?;
    ensure!(c.data().iter().zip(y.data()).all(|(a, b)| *b == 1.5 * a), "zero params are not exactly 1.5 C");
    Ok(format!("max deviation {worst:.2e}, zero params exact"))
}

fn mask_range_and_identity() -> Outcome {
    let mut r = rng(1004);
    for (variant, seed) in [(Variant::HifiStream, 1), (Variant::HifiWoSpec, 2)] {
        let cfg = ModelConfig::for_variant(variant);
        for scale in [1.0f32, 300.0] {
            let mut w: Weights = init_random(&cfg, seed).map_err(|e| e.to_string())?;
            for name in w.names().map(str::to_string).collect::<Vec<_>>() {
                w.get_mut(&name).unwrap().data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            let feats = uniform(&mut r, &[1, 513, 20]).map(|v| 4.0 * v.abs()).cast::<f32>();
            let mask = match cfg.masknet {
                MaskNetConfig::Fms { .. } => fms_masknet_forward(&feats, &cfg.masknet, &w),
                MaskNetConfig::Unet { .. } => unet_masknet_forward(&feats, &cfg.masknet, &w),
            }
            .map_err(|e| e.to_string())?;
            ensure!(mask.data().iter().all(|&g| (0.0..=1.0).contains(&g)), "{variant}: mask value outside [0, 1]");
        }
    }
    let x = audio32(&tone(20000, 16000));
    let xr: Vec<f64> = x.samples().iter().map(|&v| v as f64).collect();
    let s = signal::stft(&x, &FrameConfig::default()).map_err(|e| e.to_string())?;
    let ones = MaskMatrix::filled(s.bins(), s.frames(), 1.0).unwrap();
    let y = signal::istft(&signal::apply_mask(&s, &ones).unwrap(), 16000).unwrap();
    let yr: Vec<f64> = y.samples().iter().map(|&v| v as f64).collect();
    let mut worst = rel_l2(&xr, &yr);
    for v in Variant::ALL {
        let model = Model::passthrough(ModelConfig::for_variant(v)).map_err(|e| e.to_string())?;
        let y = model.enhance(&x).map_err(|e| e.to_string())?;
        let yr: Vec<f64> = y.samples().iter().map(|&v| v as f64).collect();
        worst = worst.max(rel_l2(&xr, &yr));
    }
    ensure!(worst <= 1e-5, "identity rel L2 {worst:.2e}");
    Ok(format!("masks in [0, 1]; identity rel L2 {worst:.2e}"))
}

fn length_contract() -> Outcome {
    let plan = ChunkPlan::default();
    let mut runs = 0;
    for (v, seed) in Variant::ALL.into_iter().zip(10..) {
        let model = Model::random(ModelConfig::for_variant(v), seed).map_err(|e| e.to_string())?;
        for n in [256usize, 1600, 4096, 10000, 48000] {
            let mut r = rng(n as u64);
            let x = audio32(&noise(&mut r, n, 0.5));
            let a = model.enhance(&x).map_err(|e| e.to_string())?;
            let b = process_stream(&model, &x, &plan).map_err(|e| e.to_string())?;
            ensure!(a.len() == n && b.len() == n, "{v} n={n}: offline {} stream {}", a.len(), b.len());
            runs += 2;
        }
    }
    Ok(format!("{runs} runs"))
}

fn streaming_protocol() -> Outcome {
    let lens: Vec<usize> = split(&AudioBuffer::<f32>::silence(10000, 16000), &ChunkPlan::default()).iter().map(|c| c.len()).collect();
    ensure!(lens == vec![4096, 4096, 1808], "split gave {lens:?}");
    let model = Model::random(ModelConfig::for_variant(Variant::HifiStream), 5).map_err(|e| e.to_string())?;
    let plan = ChunkPlan::default();
    let mut r = rng(1006);
    let single = audio32(&noise(&mut r, 3000, 0.5));
    let a = model.enhance(&single).map_err(|e| e.to_string())?;
    let b = process_stream(&model, &single, &plan).map_err(|e| e.to_string())?;
    ensure!(a.samples().iter().zip(b.samples()).all(|(p, q)| p.to_bits() == q.to_bits()), "single chunk differs from offline");

    let base = noise(&mut r, 10000, 0.5);
    let mut changed = base.clone();
    changed[4096..8192].iter_mut().for_each(|v| *v *= -0.3);
    let a = process_stream(&model, &audio32(&base), &plan).map_err(|e| e.to_string())?;
    let b = process_stream(&model, &audio32(&changed), &plan).map_err(|e| e.to_string())?;
    let same = |lo: usize, hi: usize| (lo..hi).all(|i| a.samples()[i].to_bits() == b.samples()[i].to_bits());
    ensure!(same(0, 4096) && same(8192, 10000), "edit leaked into neighbouring chunks");
    for (k, c) in split(&audio32(&base), &plan).iter().enumerate() {
        let alone = model.enhance(c).map_err(|e| e.to_string())?;
        ensure!(
            alone.samples().iter().enumerate().all(|(i, v)| v.to_bits() == a.samples()[k * 4096 + i].to_bits()),
            "chunk {k} differs from isolated processing"
        );
    }
    Ok("split, single chunk and independence bitwise".into())
}

fn complexity() -> Outcome {
    let targets = [
        (Variant::HifiStream, 1.174e6, 1.895),
        (Variant::HifiStream2d, 0.497e6, 1.973),
        (Variant::HifiWoSpec, 1.356e6, 2.007),
        (Variant::Hifi2dMrf, 0.677e6, 2.084),
    ];
    let mut detail = Vec::new();
    let mut failures = Vec::new();
    for (v, params, gmacs) in targets {
        let cfg = ModelConfig::for_variant(v);
        let p = total_params(&cfg) as f64;
        let g = profiler::profile(&cfg, 1.0).map_err(|e| e.to_string())?.gmacs_per_second();
        let (dp, dg) = ((p - params) / params, (g - gmacs) / gmacs);
        detail.push(format!("{v} {:.3}M ({:+.1}%) {g:.3} GMACs/s ({:+.1}%)", p / 1e6, 100.0 * dp, 100.0 * dg));
        if dp.abs() > 0.15 || dg.abs() > 0.20 {
            failures.push(v.to_string());
        }
    }
    ensure!(failures.is_empty(), "out of tolerance: {failures:?}; {}", detail.join("; "));
    let p = |v| total_params(&ModelConfig::for_variant(v));
    ensure!(
        p(Variant::HifiStream2d) < p(Variant::Hifi2dMrf) && p(Variant::Hifi2dMrf) < p(Variant::HifiStream) && p(Variant::HifiStream) < p(Variant::HifiWoSpec),
        "parameter ordering violated"
    );
    let masknet = |v| count_params(&ModelConfig::for_variant(v)).into_iter().find(|(c, _)| *c == "masknet").map(|(_, n)| n as f64).unwrap_or(0.0);
    let ratio = masknet(Variant::HifiStream) / masknet(Variant::HifiWoSpec);
    ensure!(ratio <= 1.0 / 15.0, "masknet ratio {ratio:.4}");
    detail.push(format!("masknet ratio 1/{:.0}", 1.0 / ratio));
    Ok(detail.join("; "))
}

fn mac_oracle() -> Outcome {
    let model = Model::random(ModelConfig::for_variant(Variant::HifiStream), 0).map_err(|e| e.to_string())?;
    let (analytic, measured) = verify_counts(&model, &AudioBuffer::silence(16000, 16000)).map_err(|e| e.to_string())?;
    let rel = (analytic as f64 - measured as f64).abs() / analytic as f64;
    ensure!(rel <= 0.01, "analytic {analytic} measured {measured}");
    Ok(format!("analytic {analytic}, measured {measured}, rel {rel:.2e}"))
}

fn metric_oracles() -> Outcome {
    let x = tone(16000, 16000);
    let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
    let sdr = metrics::sdr(&audio(x.clone()), &audio(half)).map_err(|e| e.to_string())?.value;
    ensure!((sdr - 6.0206).abs() <= 1e-3, "sdr(x, x/2) = {sdr}");

    let mut r = rng(1008);
    let y: Vec<f64> = x.iter().zip(noise(&mut r, 16000, 0.2)).map(|(a, b)| a + b).collect();
    let base = metrics::si_sdr(&audio(x.clone()), &audio(y.clone())).map_err(|e| e.to_string())?.value;
    let mut drift: f64 = 0.0;
    for k in 0..50 {
        let scale = 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
        let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
        drift = drift.max((metrics::si_sdr(&audio(x.clone()), &audio(scaled)).map_err(|e| e.to_string())?.value - base).abs());
    }
    ensure!(drift <= 1e-6, "si_sdr drift {drift:.2e}");

    let s = metrics::stoi(&audio(x.clone()), &audio(x)).map_err(|e| e.to_string())?;
    ensure!((s - 1.0).abs() <= 1e-6, "stoi(x, x) = {s}");
    let loss = metrics::composite_generator_loss(1.0, 0.5, 0.1);
    ensure!(loss == 6.5, "composite loss {loss}");
    Ok(format!("sdr {sdr:.4} dB, si_sdr drift {drift:.1e}, stoi {s:.6}, loss {loss}"))
}

fn dataset_dirs() -> Option<(PathBuf, PathBuf)> {
    Some((std::env::var_os("HIFISTREAM_CLEAN_DIR")?.into(), std::env::var_os("HIFISTREAM_NOISY_DIR")?.into()))
}

fn noisy_baseline() -> Option<Outcome> {
    let (clean, noisy) = dataset_dirs()?;
    Some((|| {
        let (pairs, _) = EvalManifest::new(clean, noisy).pairs().map_err(|e| e.to_string())?;
        ensure!(!pairs.is_empty(), "no paired files");
        let mut report = metrics::MetricsReport::new();
        for p in &pairs {
            let c: AudioBuffer<f64> = io::read_wav(&p.clean).map_err(|e| e.to_string())?;
            let y: AudioBuffer<f64> = io::read_wav(&p.noisy).map_err(|e| e.to_string())?;
            report.push(metrics::evaluate(&p.id, &c, &y).map_err(|e| e.to_string())?);
        }
        let si = report.mean("si_sdr").unwrap_or(f64::NAN);
        let st = report.mean("stoi").unwrap_or(f64::NAN);
        ensure!((si - 8.440).abs() <= 0.3 && (st - 0.790).abs() <= 0.02, "SI-SDR {si:.3} dB, STOI {st:.3} over {} clips", pairs.len());
        Ok(format!("SI-SDR {si:.3} dB, STOI {st:.3} over {} clips", pairs.len()))
    })())
}

fn checkpoint_direction() -> Option<Outcome> {
    let (clean, noisy) = dataset_dirs()?;
    let weights: PathBuf = std::env::var_os("HIFISTREAM_CHECKPOINT")?.into();
    let config: PathBuf = std::env::var_os("HIFISTREAM_CONFIG")?.into();
    Some((|| {
        let cfg = io::load_config(&config).map_err(|e| e.to_string())?;
        let store: Weights = io::load_weights(&weights).map_err(|e| e.to_string())?;
        let model = hifistream::build_model(cfg, store).map_err(|e| e.to_string())?;
        let (pairs, _) = EvalManifest::new(clean, noisy).pairs().map_err(|e| e.to_string())?;
        ensure!(!pairs.is_empty(), "no paired files");
        let plan = ChunkPlan::default();
        let (mut better, mut off_sum, mut str_sum) = (0usize, 0.0, 0.0);
        for p in &pairs {
            let c: AudioBuffer<f32> = io::read_wav(&p.clean).map_err(|e| e.to_string())?;
            let y: AudioBuffer<f32> = io::read_wav(&p.noisy).map_err(|e| e.to_string())?;
            let noisy_si = metrics::si_sdr(&c, &y).map_err(|e| e.to_string())?.value;
            let off = metrics::si_sdr(&c, &model.enhance(&y).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.value;
            let st = metrics::si_sdr(&c, &process_stream(&model, &y, &plan).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.value;
            better += usize::from(off > noisy_si);
            off_sum += off;
            str_sum += st;
        }
        let n = pairs.len() as f64;
        let frac = better as f64 / n;
        let (off, st) = (off_sum / n, str_sum / n);
        let detail = format!("{:.1}% improved, offline {off:.3} dB, streaming {st:.3} dB", 100.0 * frac);
        ensure!(frac >= 0.9 && st <= off, "{detail}");
        Ok(detail)
    })())
}

fn guarded(f: fn() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()))
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Status, String)> = Vec::new();
    let required: [(&str, fn() -> Outcome); 9] = [
        ("stft_round_trip", stft_round_trip),
        ("kernel_oracles", kernel_oracles),
        ("fms_law", fms_law),
        ("mask_range_and_identity", mask_range_and_identity),
        ("length_contract", length_contract),
        ("streaming_protocol", streaming_protocol),
        ("complexity", complexity),
        ("mac_oracle", mac_oracle),
        ("metric_oracles", metric_oracles),
    ];
    for (name, f) in required {
        let (status, detail) = match guarded(f) {
            Ok(d) => (Status::Pass, d),
            Err(d) => (Status::Fail, d),
        };
        results.push((name, status, detail));
    }
    let optional: [(&str, fn() -> Option<Outcome>, &str); 2] = [
        ("noisy_baseline", noisy_baseline, "set HIFISTREAM_CLEAN_DIR and HIFISTREAM_NOISY_DIR"),
        ("checkpoint_direction", checkpoint_direction, "also set HIFISTREAM_CHECKPOINT and HIFISTREAM_CONFIG"),
    ];
    for (name, f, hint) in optional {
        let (status, detail) = match catch_unwind(f).unwrap_or_else(|_| Some(Err("panicked".into()))) {
            None => (Status::Skip, hint.to_string()),
            Some(Ok(d)) => (Status::Pass, d),
            Some(Err(d)) => (Status::Fail, d),
        };
        results.push((name, status, detail));
    }

    for (name, status, detail) in &results {
        let tag = match status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("{tag} {name}: {detail}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| matches!(r.1, Status::Fail)).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
