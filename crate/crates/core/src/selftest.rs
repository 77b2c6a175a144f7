//! Quick built-in consistency checks against the reference implementations,
//! run by the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, Variant};
use crate::generator::{init_random, GeneratorModel};
use crate::io::hfsw;
use crate::kernels::{self, ConvSpec};
use crate::metrics;
use crate::oracle;
use crate::profiler;
use crate::signal::{self, AudioBuffer, FrameConfig};
use crate::tensor::RealTensor;
use crate::blocks::{fms_forward, FmsParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:<24} {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn check(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult { name, passed: worst <= tol, detail: format!("max error {worst:.3e} (tolerance {tol:.0e})") }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> RealTensor<f64> {
    RealTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn max_diff(a: &[f64], b: impl IntoIterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn conv_cases(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g = rng.random_range(1..=2);
        let spec = ConvSpec::conv1d(g * rng.random_range(1..=3), g * rng.random_range(1..=3), rng.random_range(1..=5))
            .stride(&[rng.random_range(1..=3)])
            .dilation(&[rng.random_range(1..=2)])
            .padding(&[rng.random_range(0..=2)])
            .groups(g);
        let shape = [spec.in_channels, rng.random_range(12..30)];
        let x = random_tensor(rng, &shape);
        let w = random_tensor(rng, &spec.weight_shape());
        let b = random_tensor(rng, &[spec.out_channels]);
        let fast = kernels::conv1d(&x, &spec, &w, Some(&b)).expect("valid case");
        let slow = oracle::conv1d(&x, &spec, &w, Some(&b));
        worst = worst.max(max_diff(fast.data(), slow.into_iter().flatten()));
    }
    worst
}

fn conv2d_cases(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let spec = ConvSpec::conv2d(rng.random_range(1..=3), rng.random_range(1..=3), [rng.random_range(1..=3), rng.random_range(1..=3)])
            .stride(&[rng.random_range(1..=2), rng.random_range(1..=2)])
            .dilation(&[1, rng.random_range(1..=3)])
            .padding(&[rng.random_range(0..=1), rng.random_range(0..=2)]);
        let shape = [spec.in_channels, rng.random_range(6..12), rng.random_range(8..14)];
        let x = random_tensor(rng, &shape);
        let w = random_tensor(rng, &spec.weight_shape());
        let b = random_tensor(rng, &[spec.out_channels]);
        let fast = kernels::conv2d(&x, &spec, &w, Some(&b)).expect("valid case");
        let (slow, ..) = oracle::conv2d(&x, &spec, &w, Some(&b));
        worst = worst.max(max_diff(fast.data(), slow.into_iter().flatten()));
    }
    worst
}

fn transposed_cases(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let s = rng.random_range(1..=3);
        let k = s + 2 * rng.random_range(0..=2);
        let spec = ConvSpec::conv1d(rng.random_range(1..=3), rng.random_range(1..=3), k).stride(&[s]).padding(&[(k - s) / 2]);
        let shape = [spec.in_channels, rng.random_range(3..10)];
        let x = random_tensor(rng, &shape);
        let w = random_tensor(rng, &spec.transposed_weight_shape());
        let b = random_tensor(rng, &[spec.out_channels]);
        let fast = kernels::conv_transpose1d(&x, &spec, &w, Some(&b)).expect("valid case");
        let slow = oracle::conv_transpose1d(&x, &spec, &w, Some(&b));
        worst = worst.max(max_diff(fast.data(), slow.into_iter().flatten()));
    }
    worst
}

fn stft_case(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let cfg = FrameConfig::new(64, 16, 64, true).expect("valid frame");
    let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
    let audio = AudioBuffer::new(x.clone(), 16000).expect("finite");
    let spec = signal::stft(&audio, &cfg).expect("stft");
    let slow = oracle::stft(&x, 64, 16);
    let mut worst: f64 = 0.0;
    for (m, frame) in slow.iter().enumerate() {
        for (f, c) in frame.iter().enumerate() {
            worst = worst.max((spec.at(f, m) - c).norm());
        }
    }
    let back = signal::istft(&spec, 16000).expect("istft");
    let num: f64 = x.iter().zip(back.samples()).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    (worst, (num / den).sqrt())
}

/// Runs every check; never panics on a failed comparison.
pub fn run() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut out = vec![
        check("conv1d oracle", conv_cases(&mut rng), 1e-9),
        check("conv2d oracle", conv2d_cases(&mut rng), 1e-9),
        check("conv_transpose1d oracle", transposed_cases(&mut rng), 1e-9),
    ];
    let (dft, rt) = stft_case(&mut rng);
    out.push(check("stft vs direct DFT", dft, 1e-9));
    out.push(check("stft round trip", rt, 1e-9));

    let c = random_tensor(&mut rng, &[7, 9]);
    let y = fms_forward(&c, &FmsParams::scalar(0.0, 0.0)).expect("fms");
    out.push(check("fms zero params", max_diff(y.data(), c.data().iter().map(|v| 1.5 * v)), 0.0));

    let x: Vec<f64> = (0..16000).map(|i| (i as f64 * 0.031).sin() * (1.0 + (i as f64 * 0.0007).cos())).collect();
    let clean = AudioBuffer::new(x.clone(), 16000).expect("finite");
    let half = AudioBuffer::new(x.iter().map(|v| v / 2.0).collect(), 16000).expect("finite");
    let sdr = metrics::sdr(&clean, &half).map(|v| v.value).unwrap_or(f64::NAN);
    out.push(check("sdr(x, x/2)", (sdr - 20.0 * 2f64.log10()).abs(), 1e-9));
    let stoi = metrics::stoi(&clean, &clean).unwrap_or(f64::NAN);
    out.push(check("stoi(x, x)", (stoi - 1.0).abs(), 1e-6));

    let cfg = ModelConfig::for_variant(Variant::HifiStream);
    let store = init_random::<f32>(&cfg, 7).expect("init");
    let back: crate::weights::WeightStore<f32> = hfsw::decode_weights(&hfsw::encode_weights(&store)).unwrap_or_default();
    out.push(CheckResult {
        name: "hfsw round trip",
        passed: back == store,
        detail: format!("{} tensors", store.len()),
    });

    let model = GeneratorModel::<f32>::passthrough(cfg).expect("model");
    let input = AudioBuffer::<f32>::silence(4096, 16000);
    match profiler::verify_counts(&model, &input) {
        Ok((analytic, measured)) => {
            let rel = (analytic as f64 - measured as f64).abs() / analytic as f64;
            out.push(CheckResult {
                name: "MAC count",
                passed: rel <= 0.01,
                detail: format!("analytic {analytic}, measured {measured}"),
            });
        }
        Err(e) => out.push(CheckResult { name: "MAC count", passed: false, detail: e.to_string() }),
    }
    out
}
