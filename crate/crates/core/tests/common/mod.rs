#![allow(dead_code)]

use hifistream::kernels::ConvSpec;
use hifistream::{AudioBuffer, RealTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> RealTensor<f64> {
    RealTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn noise(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-amp..amp)).collect()
}

/// Speech-like test signal: two modulated partials with a silent gap.
pub fn tone(n: usize, rate: u32) -> Vec<f64> {
    let fs = rate as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let gap = i >= n / 3 && i < n / 3 + n / 12;
            let v = (2.0 * std::f64::consts::PI * 440.0 * t).sin() * (0.6 + 0.4 * (2.0 * std::f64::consts::PI * 3.0 * t).sin())
                + 0.3 * (2.0 * std::f64::consts::PI * 1250.0 * t + 0.5).sin();
            if gap { 0.0 } else { v }
        })
        .collect()
}

pub fn audio(samples: Vec<f64>) -> AudioBuffer<f64> {
    AudioBuffer::new(samples, 16000).unwrap()
}

pub fn audio32(samples: &[f64]) -> AudioBuffer<f32> {
    AudioBuffer::new(samples.iter().map(|&v| v as f32).collect(), 16000).unwrap()
}

/// Random conv geometry with an input long enough for at least one output.
pub fn random_conv1d(rng: &mut ChaCha8Rng) -> (ConvSpec, usize) {
    let g = rng.random_range(1..=3);
    let k = rng.random_range(1..=7);
    let d = rng.random_range(1..=3);
    let spec = ConvSpec::conv1d(g * rng.random_range(1..=3), g * rng.random_range(1..=3), k)
        .stride(&[rng.random_range(1..=3)])
        .dilation(&[d])
        .padding(&[rng.random_range(0..=3)])
        .groups(g);
    let len = d * (k - 1) + 1 + rng.random_range(0..40);
    (spec, len)
}

pub fn random_conv2d(rng: &mut ChaCha8Rng) -> (ConvSpec, [usize; 2]) {
    let g = rng.random_range(1..=2);
    let k = [rng.random_range(1..=4), rng.random_range(1..=4)];
    let d = [rng.random_range(1..=2), rng.random_range(1..=3)];
    let spec = ConvSpec::conv2d(g * rng.random_range(1..=3), g * rng.random_range(1..=3), k)
        .stride(&[rng.random_range(1..=2), rng.random_range(1..=3)])
        .dilation(&d)
        .padding(&[rng.random_range(0..=2), rng.random_range(0..=2)])
        .groups(g);
    let h = d[0] * (k[0] - 1) + 1 + rng.random_range(0..10);
    let w = d[1] * (k[1] - 1) + 1 + rng.random_range(0..12);
    (spec, [h, w])
}

pub fn random_transposed(rng: &mut ChaCha8Rng) -> (ConvSpec, usize) {
    let g = rng.random_range(1..=2);
    let s = rng.random_range(1..=4);
    let k = rng.random_range(1..=8);
    let d = rng.random_range(1..=2);
    let len = rng.random_range(2..20);
    let full = (len - 1) * s + d * (k - 1) + 1;
    let pmax = (full - 1) / 2;
    let spec = ConvSpec::conv1d(g * rng.random_range(1..=3), g * rng.random_range(1..=3), k)
        .stride(&[s])
        .dilation(&[d])
        .padding(&[rng.random_range(0..=pmax.min(4))])
        .groups(g);
    (spec, len)
}

pub fn max_abs_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_l2(reference: &[f64], estimate: &[f64]) -> f64 {
    let num: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}
