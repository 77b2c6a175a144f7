//! Parameter and multiply-accumulate accounting.
//!
//! `count_macs` derives every layer's work from shape arithmetic alone, without
//! running the network. Conventions: a convolution costs one MAC per output
//! element per input tap (`C_out x L_out x C_in/g x K`, padding included); a
//! transposed convolution costs `C_in x L_in x C_out/g x K`; each STFT or
//! inverse STFT frame costs `2 N log2 N`; the mel projection costs
//! `n_mels x F x M`; each FMS gate costs one MAC per channel and frame.
//! Activations, residual additions and resampling copies are free.

use std::fmt;

use serde::Serialize;

use crate::blocks::{masknet, mrf, upsampler, wave_unet};
use crate::config::{ConvDims, MaskNetConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::generator::{manifest, GeneratorModel};
use crate::instrument;
use crate::kernels::ConvSpec;
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub name: String,
    pub params: usize,
    pub macs: u64,
}

/// Per-component parameters and MACs for one input duration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub variant: String,
    pub samples: usize,
    pub sample_rate: u32,
    pub rows: Vec<ProfileRow>,
}

impl ProfileReport {
    pub fn total_params(&self) -> usize {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn total_macs(&self) -> u64 {
        self.rows.iter().map(|r| r.macs).sum()
    }

    pub fn seconds(&self) -> f64 {
        self.samples as f64 / self.sample_rate as f64
    }

    /// Billions of MACs per second of input audio.
    pub fn gmacs_per_second(&self) -> f64 {
        self.total_macs() as f64 / self.seconds() / 1e9
    }

    pub fn row(&self, name: &str) -> Option<&ProfileRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ProfileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {} ({:.3} s at {} Hz)", self.variant, self.seconds(), self.sample_rate)?;
        writeln!(f, "{:<12} {:>12} {:>16}", "component", "params", "MACs")?;
        for r in &self.rows {
            writeln!(f, "{:<12} {:>12} {:>16}", r.name, r.params, r.macs)?;
        }
        writeln!(f, "{:<12} {:>12} {:>16}", "total", self.total_params(), self.total_macs())?;
        write!(f, "params {:.3} M, {:.3} GMACs per second of audio", self.total_params() as f64 / 1e6, self.gmacs_per_second())
    }
}

/// Component a canonical tensor or layer name belongs to.
pub fn component_of(name: &str) -> &'static str {
    match name.split('.').next() {
        Some("hifi") => "upsampler",
        Some("waveunet") => "wave_unet",
        Some("masknet") => "masknet",
        _ => "other",
    }
}

pub const COMPONENTS: [&str; 4] = ["stft", "upsampler", "wave_unet", "masknet"];

/// Trainable scalars per component.
pub fn count_params(config: &ModelConfig) -> Vec<(&'static str, usize)> {
    let layers = manifest(config);
    COMPONENTS
        .iter()
        .map(|&c| (c, layers.iter().filter(|l| component_of(&l.name) == c).map(|l| l.param_count()).sum()))
        .collect()
}

pub fn total_params(config: &ModelConfig) -> usize {
    count_params(config).iter().map(|(_, n)| n).sum()
}

fn conv_macs(spec: &ConvSpec, in_extent: &[usize]) -> Result<(u64, Vec<usize>)> {
    let out: Option<Vec<usize>> = in_extent.iter().enumerate().map(|(a, &l)| spec.output_len(a, l)).collect();
    let out = out.ok_or_else(|| Error::TooShort(format!("input {in_extent:?} too short for kernel {:?}", spec.kernel)))?;
    let elems = spec.out_channels * out.iter().product::<usize>();
    Ok(((elems * spec.macs_per_output()) as u64, out))
}

fn transposed_macs(spec: &ConvSpec, len: usize) -> Result<(u64, usize)> {
    let out = spec
        .transposed_output_len(len)
        .ok_or_else(|| Error::TooShort(format!("length {len} for transposed kernel {:?}", spec.kernel)))?;
    Ok(((spec.in_channels * len * (spec.out_channels / spec.groups) * spec.kernel[0]) as u64, out))
}

fn mrf_macs(config: &ModelConfig, channels: usize, len: usize) -> Result<u64> {
    let spec = config.mrf.at(channels);
    let extent: Vec<usize> = match spec.dims {
        ConvDims::One => vec![len],
        ConvDims::Two => vec![channels, len],
    };
    let mut macs = 0;
    if spec.dims == ConvDims::Two {
        macs += conv_macs(&upsampler::lift_conv(spec.channels), &extent)?.0;
        macs += conv_macs(&upsampler::proj_conv(spec.channels), &extent)?.0;
    }
    for (b, dils) in spec.dilations.iter().enumerate() {
        for j in 0..dils.len() {
            let (c1, c2) = mrf::conv_pair(&spec, b, j);
            macs += conv_macs(&c1, &extent)?.0 + conv_macs(&c2, &extent)?.0;
        }
    }
    Ok(macs)
}

fn upsampler_macs(config: &ModelConfig, frames: usize) -> Result<u64> {
    let up = &config.upsampler;
    let (mut macs, l) = conv_macs(&upsampler::pre_conv(config.mel.n_mels, up), &[frames])?;
    let mut len = l[0];
    for i in 0..up.rates.len() {
        let (m, l) = transposed_macs(&upsampler::up_conv(up, i), len)?;
        len = l;
        macs += m + mrf_macs(config, up.stage_channels(i), len)?;
    }
    macs += conv_macs(&upsampler::post_conv(up), &[len])?.0;
    Ok(macs)
}

fn wave_unet_macs(config: &ModelConfig, samples: usize) -> Result<u64> {
    let spec = &config.wave_unet;
    let mut len = wave_unet::padded_len(samples, spec.depth());
    let mut macs = 0;
    for (_, s, transposed) in wave_unet::plan(config.upsampler.out_channels + 1, spec) {
        let (m, l) = if transposed { transposed_macs(&s, len)? } else { conv_macs(&s, &[len]).map(|(m, l)| (m, l[0]))? };
        macs += m;
        len = l;
    }
    Ok(macs)
}

fn masknet_macs(config: &ModelConfig, bins: usize, frames: usize) -> Result<u64> {
    match &config.masknet {
        MaskNetConfig::Fms { channels, .. } => {
            let grid = [bins, frames];
            let mut macs = 0;
            for (cin, cout) in masknet::stage_io(channels) {
                macs += conv_macs(&masknet::conv3(cin, cout), &grid)?.0;
                macs += conv_macs(&masknet::conv3(cout, cout), &grid)?.0;
                if cin != cout {
                    macs += conv_macs(&masknet::conv1x1(cin, cout), &grid)?.0;
                }
                macs += (cout * frames) as u64;
            }
            Ok(macs + conv_macs(&masknet::conv1x1(*channels.last().unwrap(), 1), &grid)?.0)
        }
        MaskNetConfig::Unet { channels, .. } => {
            let depth = channels.len();
            let mut grid = vec![masknet::unet_padded(bins, depth), masknet::unet_padded(frames, depth)];
            let mut macs = 0;
            for (name, s) in masknet::unet_plan(channels) {
                let (m, out) = conv_macs(&s, &grid)?;
                macs += m;
                // 1x1 decoder convs run before a 2x nearest upsample
                grid = if name.starts_with("masknet.up") { out.iter().map(|v| v * 2).collect() } else { out };
            }
            Ok(macs)
        }
    }
}

/// Analytic MAC breakdown for a `samples`-long input.
pub fn count_macs(config: &ModelConfig, samples: usize) -> Result<Vec<(&'static str, u64)>> {
    config.validate()?;
    if samples == 0 {
        return Err(Error::Empty("profile input"));
    }
    let frame = &config.frame;
    let frames = frame.frames(samples);
    let bins = frame.bins();
    // noisy STFT, refined STFT, inverse STFT, mel projection
    let stft = 3 * frames as u64 * frame.fft_macs_per_frame() + (config.mel.n_mels * bins * frames) as u64;
    Ok(vec![
        ("stft", stft),
        ("upsampler", upsampler_macs(config, frames)?),
        ("wave_unet", wave_unet_macs(config, samples)?),
        ("masknet", masknet_macs(config, bins, frames)?),
    ])
}

/// Parameters and analytic MACs for `seconds` of audio.
pub fn profile(config: &ModelConfig, seconds: f64) -> Result<ProfileReport> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(Error::Config(format!("profile duration must be positive, got {seconds}")));
    }
    let samples = (seconds * config.sample_rate as f64).round() as usize;
    let macs = count_macs(config, samples)?;
    let params = count_params(config);
    let rows = macs
        .into_iter()
        .zip(params)
        .map(|((name, m), (_, p))| ProfileRow { name: name.to_string(), params: p, macs: m })
        .collect();
    Ok(ProfileReport { variant: config.variant.to_string(), samples, sample_rate: config.sample_rate, rows })
}

/// `(analytic, measured)` MACs for one forward pass over `input`; the measured
/// figure is what the kernels actually report while running.
pub fn verify_counts<T: Scalar>(model: &GeneratorModel<T>, input: &AudioBuffer<T>) -> Result<(u64, u64)> {
    let analytic = count_macs(model.config(), input.len())?.iter().map(|(_, m)| m).sum();
    let (out, measured) = instrument::counting(|| model.enhance(input));
    out?;
    Ok((analytic, measured))
}
