//! Short-time Fourier analysis/synthesis, mel projection, spectral masking
//! and the additive-noise/impulse-response corruption model.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::instrument;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

/// Mono audio with its sample rate in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape("audio", format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![T::zero(); len], sample_rate }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<T>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn cast<U: Scalar>(&self) -> AudioBuffer<U> {
        AudioBuffer {
            samples: self.samples.iter().map(|&v| U::from_acc(v.to_acc())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
}

/// STFT framing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    n_fft: usize,
    hop: usize,
    win_length: usize,
    window: WindowKind,
    center: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { n_fft: 1024, hop: 256, win_length: 1024, window: WindowKind::Hann, center: true }
    }
}

impl FrameConfig {
    /// Validates framing and that overlap-add inversion is well defined
    /// (the summed squared window never vanishes).
    pub fn new(n_fft: usize, hop: usize, win_length: usize, center: bool) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(format!("frame config: {m}")));
        if n_fft < 2 || n_fft % 2 != 0 {
            return bad(format!("n_fft {n_fft} must be even and >= 2"));
        }
        if hop == 0 || hop > win_length || win_length > n_fft {
            return bad(format!("need 0 < hop ({hop}) <= win_length ({win_length}) <= n_fft ({n_fft})"));
        }
        if win_length % hop != 0 {
            return bad(format!("hop {hop} does not divide win_length {win_length}"));
        }
        let cfg = Self { n_fft, hop, win_length, window: WindowKind::Hann, center };
        let w = cfg.window::<f64>();
        let min_overlap = (0..hop)
            .map(|i| (i..n_fft).step_by(hop).map(|n| w[n] * w[n]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if min_overlap < 1e-8 {
            return bad(format!("Hann window of {win_length} does not overlap-add at hop {hop}"));
        }
        Ok(cfg)
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }
    pub fn hop(&self) -> usize {
        self.hop
    }
    pub fn win_length(&self) -> usize {
        self.win_length
    }
    pub fn window_kind(&self) -> WindowKind {
        self.window
    }
    pub fn center(&self) -> bool {
        self.center
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        if self.center {
            1 + len / self.hop
        } else if len >= self.n_fft {
            1 + (len - self.n_fft) / self.hop
        } else {
            0
        }
    }

    /// Periodic Hann window of `win_length`, zero-padded and centered in `n_fft`.
    pub fn window<T: Scalar>(&self) -> Vec<T> {
        let offset = (self.n_fft - self.win_length) / 2;
        let mut w = vec![T::zero(); self.n_fft];
        for i in 0..self.win_length {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / self.win_length as f64;
            w[offset + i] = T::from_acc(0.5 - 0.5 * phase.cos());
        }
        w
    }

    /// Real MACs charged per transformed frame: `n log2 n / 2` complex MACs, four real each.
    pub fn fft_macs_per_frame(&self) -> u64 {
        let n = self.n_fft as f64;
        (2.0 * n * n.log2()).round() as u64
    }
}

/// `F x M` complex spectrogram (bin-major) with the framing that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T> {
    bins: usize,
    frames: usize,
    data: Vec<Complex<T>>,
    config: FrameConfig,
    /// Length of the analyzed signal, used to trim the inverse.
    signal_len: Option<usize>,
}

impl<T: Scalar> ComplexSpectrogram<T> {
    pub fn new(config: FrameConfig, frames: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let bins = config.bins();
        if data.len() != bins * frames {
            return Err(Error::shape(
                "spectrogram",
                format!("{bins} bins x {frames} frames needs {} values, got {}", bins * frames, data.len()),
            ));
        }
        Ok(Self { bins, frames, data, config, signal_len: None })
    }

    pub fn zeros(config: FrameConfig, frames: usize) -> Self {
        let bins = config.bins();
        Self { bins, frames, data: vec![Complex::new(T::zero(), T::zero()); bins * frames], config, signal_len: None }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn config(&self) -> &FrameConfig {
        &self.config
    }
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }
    pub fn signal_len(&self) -> Option<usize> {
        self.signal_len
    }
    pub fn with_signal_len(mut self, len: Option<usize>) -> Self {
        self.signal_len = len;
        self
    }

    pub fn at(&self, bin: usize, frame: usize) -> Complex<T> {
        self.data[bin * self.frames + frame]
    }

    /// `|S|` as a `[F, M]` tensor.
    pub fn magnitude(&self) -> RealTensor<T> {
        RealTensor::from_parts_unchecked(vec![self.bins, self.frames], self.data.iter().map(|c| c.norm()).collect())
    }

    /// `a * self + b * other`, keeping this spectrogram's framing.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if (self.bins, self.frames) != (other.bins, other.frames) {
            return Err(Error::shape("spectrogram sum", "bin/frame counts differ"));
        }
        let data = self.data.iter().zip(&other.data).map(|(&x, &y)| x * a + y * b).collect();
        Ok(Self { data, ..self.clone() })
    }
}

/// Real-valued gain matrix with entries in `[0, 1]`, laid out like a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix<T> {
    bins: usize,
    frames: usize,
    data: Vec<T>,
}

impl<T: Scalar> MaskMatrix<T> {
    pub fn new(bins: usize, frames: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != bins * frames {
            return Err(Error::shape("mask", format!("{bins}x{frames} mask given {} values", data.len())));
        }
        if let Some(i) = data.iter().position(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::shape("mask", format!("entry {i} = {} outside [0, 1]", data[i])));
        }
        Ok(Self { bins, frames, data })
    }

    pub fn filled(bins: usize, frames: usize, value: T) -> Result<Self> {
        Self::new(bins, frames, vec![value; bins * frames])
    }

    pub fn bins(&self) -> usize {
        self.bins
    }
    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Planned forward/inverse FFTs plus the analysis window for one [`FrameConfig`].
pub struct StftProcessor<T: Scalar> {
    config: FrameConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> StftProcessor<T> {
    pub fn new(config: FrameConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window: config.window(),
            forward: planner.plan_fft_forward(config.n_fft),
            inverse: planner.plan_fft_inverse(config.n_fft),
            config,
        }
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn stft(&self, audio: &AudioBuffer<T>) -> Result<ComplexSpectrogram<T>> {
        let x = audio.samples();
        if x.is_empty() {
            return Err(Error::Empty("stft input"));
        }
        let cfg = &self.config;
        let (n_fft, hop) = (cfg.n_fft, cfg.hop);
        let frames = cfg.frames(x.len());
        if frames == 0 {
            return Err(Error::TooShort(format!("{} samples < n_fft {n_fft} without centering", x.len())));
        }
        let pad = if cfg.center { n_fft / 2 } else { 0 };
        let bins = cfg.bins();
        let mut data = vec![Complex::new(T::zero(), T::zero()); bins * frames];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        for m in 0..frames {
            let start = (m * hop) as isize - pad as isize;
            for (n, slot) in buf.iter_mut().enumerate() {
                let v = x[reflect_index(start + n as isize, x.len())];
                *slot = Complex::new(v * self.window[n], T::zero());
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (f, &c) in buf[..bins].iter().enumerate() {
                data[f * frames + m] = c;
            }
        }
        instrument::record(frames as u64 * cfg.fft_macs_per_frame());
        Ok(ComplexSpectrogram { bins, frames, data, config: *cfg, signal_len: Some(x.len()) })
    }

    /// Overlap-add inverse with squared-window normalization.
    pub fn istft(&self, spec: &ComplexSpectrogram<T>, sample_rate: u32) -> Result<AudioBuffer<T>> {
        if spec.config != self.config {
            return Err(Error::Config("spectrogram was produced with a different frame config".into()));
        }
        let cfg = &self.config;
        let (n_fft, hop, frames, bins) = (cfg.n_fft, cfg.hop, spec.frames, spec.bins);
        let full = n_fft + hop * (frames.max(1) - 1);
        let mut y = vec![0.0f64; full];
        let mut norm = vec![0.0f64; full];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n_fft as f64;
        for m in 0..frames {
            for f in 0..bins {
                buf[f] = spec.data[f * frames + m];
            }
            for f in bins..n_fft {
                buf[f] = buf[n_fft - f].conj();
            }
            // DC and Nyquist of a real signal carry no imaginary part.
            buf[0].im = T::zero();
            buf[n_fft / 2].im = T::zero();
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let base = m * hop;
            for n in 0..n_fft {
                let w = self.window[n].to_acc();
                y[base + n] += buf[n].re.to_acc() * scale * w;
                norm[base + n] += w * w;
            }
        }
        instrument::record(frames as u64 * cfg.fft_macs_per_frame());
        let start = if cfg.center { n_fft / 2 } else { 0 };
        let natural = if cfg.center { hop * (frames.max(1) - 1) } else { full };
        let len = spec.signal_len.unwrap_or(natural);
        let samples = (start..start + len)
            .map(|i| match (y.get(i), norm.get(i)) {
                (Some(&v), Some(&n)) if n > 1e-11 => T::from_acc(v / n),
                _ => T::zero(),
            })
            .collect();
        Ok(AudioBuffer::from_parts_unchecked(samples, sample_rate))
    }
}

/// Mirror index into `0..len` (reflection without edge repeat), repeating the
/// reflection for offsets longer than the signal.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m >= len as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

pub fn stft<T: Scalar>(audio: &AudioBuffer<T>, cfg: &FrameConfig) -> Result<ComplexSpectrogram<T>> {
    StftProcessor::new(*cfg).stft(audio)
}

pub fn istft<T: Scalar>(spec: &ComplexSpectrogram<T>, sample_rate: u32) -> Result<AudioBuffer<T>> {
    StftProcessor::new(spec.config).istft(spec, sample_rate)
}

/// Elementwise gain; phases are untouched.
pub fn apply_mask<T: Scalar>(spec: &ComplexSpectrogram<T>, mask: &MaskMatrix<T>) -> Result<ComplexSpectrogram<T>> {
    if (spec.bins, spec.frames) != (mask.bins, mask.frames) {
        return Err(Error::shape(
            "apply_mask",
            format!("spectrogram {}x{} vs mask {}x{}", spec.bins, spec.frames, mask.bins, mask.frames),
        ));
    }
    let data = spec.data.iter().zip(&mask.data).map(|(&c, &g)| c.scale(g)).collect();
    Ok(ComplexSpectrogram { data, ..spec.clone() })
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters, `[n_mels, bins]`, unnormalized (peak 1).
pub fn mel_filterbank<T: Scalar>(
    bins: usize,
    n_mels: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
) -> Result<RealTensor<T>> {
    let nyquist = sample_rate as f64 / 2.0;
    if f_max > nyquist {
        return Err(Error::Config(format!("mel f_max {f_max} Hz exceeds Nyquist {nyquist} Hz")));
    }
    if !(f_min >= 0.0 && f_min < f_max) || n_mels == 0 || bins < 2 {
        return Err(Error::Config(format!("mel bank: f_min {f_min}, f_max {f_max}, n_mels {n_mels}, bins {bins}")));
    }
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let mut edges: Vec<f64> =
        (0..n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
    // undo round-off of the mel round trip at the band limits
    edges[0] = f_min;
    edges[n_mels + 1] = f_max;
    let bin_hz = nyquist / (bins - 1) as f64;
    let mut bank = RealTensor::zeros(&[n_mels, bins]);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut bank.data_mut()[m * bins..(m + 1) * bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let up = (f - left) / (center - left);
            let down = (right - f) / (right - center);
            *w = T::from_acc(up.min(down).max(0.0));
        }
        if row.iter().all(|&v| v == T::zero()) {
            return Err(Error::Config(format!(
                "mel band {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; use fewer bands"
            )));
        }
    }
    Ok(bank)
}

/// `log(1 + bank x |S|)`, shape `[n_mels, M]`.
pub fn mel_spectrogram<T: Scalar>(spec: &ComplexSpectrogram<T>, bank: &RealTensor<T>) -> Result<RealTensor<T>> {
    bank.expect_rank(2, "mel bank")?;
    let (n_mels, bins) = (bank.shape()[0], bank.shape()[1]);
    if bins != spec.bins {
        return Err(Error::shape("mel_spectrogram", format!("bank has {bins} bins, spectrogram {}", spec.bins)));
    }
    let frames = spec.frames;
    let mag: Vec<f64> = spec.data.iter().map(|c| c.norm().to_acc()).collect();
    let mut out = vec![T::zero(); n_mels * frames];
    let mut acc = vec![0.0f64; frames];
    for m in 0..n_mels {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (f, &w) in bank.outer(m).iter().enumerate() {
            let w = w.to_acc();
            if w == 0.0 {
                continue;
            }
            for (a, &v) in acc.iter_mut().zip(&mag[f * frames..(f + 1) * frames]) {
                *a += w * v;
            }
        }
        for (o, &a) in out[m * frames..(m + 1) * frames].iter_mut().zip(&acc) {
            *o = T::from_acc(a.ln_1p());
        }
    }
    instrument::record((n_mels * bins * frames) as u64);
    Ok(RealTensor::from_parts_unchecked(vec![n_mels, frames], out))
}

/// `y = f * x + noise`: causal full convolution with the impulse response,
/// trimmed to `len(x)` from the start.
pub fn corrupt<T: Scalar>(x: &AudioBuffer<T>, ir: &RealTensor<T>, noise: &AudioBuffer<T>) -> Result<AudioBuffer<T>> {
    ir.expect_rank(1, "impulse response")?;
    if x.sample_rate != noise.sample_rate {
        return Err(Error::SampleRate { expected: x.sample_rate, actual: noise.sample_rate });
    }
    if x.len() != noise.len() {
        return Err(Error::shape("corrupt", format!("signal has {} samples, noise {}", x.len(), noise.len())));
    }
    let f = ir.data();
    let samples = (0..x.len())
        .map(|t| {
            let acc: f64 = f
                .iter()
                .take(t + 1)
                .enumerate()
                .map(|(k, &h)| h.to_acc() * x.samples[t - k].to_acc())
                .sum();
            T::from_acc(acc + noise.samples[t].to_acc())
        })
        .collect();
    AudioBuffer::new(samples, x.sample_rate)
}
