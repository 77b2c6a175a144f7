//! Architecture description of the four generator variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FrameConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// 1D MRF upsampler, U-Net MaskNet.
    HifiWoSpec,
    /// 2D MRF upsampler, U-Net MaskNet.
    Hifi2dMrf,
    /// 1D MRF upsampler, FMS MaskNet.
    HifiStream,
    /// 2D MRF upsampler, FMS MaskNet.
    HifiStream2d,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::HifiWoSpec, Variant::Hifi2dMrf, Variant::HifiStream, Variant::HifiStream2d];

    pub fn masknet_kind(self) -> MaskNetKind {
        match self {
            Variant::HifiWoSpec | Variant::Hifi2dMrf => MaskNetKind::Unet,
            Variant::HifiStream | Variant::HifiStream2d => MaskNetKind::Fms,
        }
    }

    pub fn mrf_dims(self) -> ConvDims {
        match self {
            Variant::HifiWoSpec | Variant::HifiStream => ConvDims::One,
            Variant::Hifi2dMrf | Variant::HifiStream2d => ConvDims::Two,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::HifiWoSpec => "hifi_wo_spec",
            Variant::Hifi2dMrf => "hifi_2dmrf",
            Variant::HifiStream => "hifi_stream",
            Variant::HifiStream2d => "hifi_stream2d",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskNetKind {
    Unet,
    Fms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvDims {
    #[serde(rename = "1d")]
    One,
    #[serde(rename = "2d")]
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { n_mels: 80, f_min: 0.0, f_max: 8000.0 }
    }
}

/// Multi-receptive-field stack shared by every upsampling stage.
///
/// In 1D each branch `i` runs `kernels[i]`-tap convolutions over the stage's
/// channels with dilations `dilations[i]`. In 2D the stage activation is viewed
/// as a single-channel `channels x time` plane, lifted to `channels_2d`
/// channels, and each branch runs `k x k` convolutions dilated along time only.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfConfig {
    pub dims: ConvDims,
    pub kernels: Vec<usize>,
    pub dilations: Vec<Vec<usize>>,
    pub channels_2d: usize,
}

impl MrfConfig {
    pub fn one_d() -> Self {
        Self { dims: ConvDims::One, kernels: vec![3, 7, 11], dilations: vec![vec![1, 3, 5]; 3], channels_2d: 0 }
    }

    pub fn two_d() -> Self {
        Self { dims: ConvDims::Two, kernels: vec![3], dilations: vec![vec![1, 3, 5]], channels_2d: 8 }
    }

    /// Spec of the MRF instance that runs on `channels` working channels.
    pub fn at(&self, channels: usize) -> MrfSpec {
        MrfSpec {
            dims: self.dims,
            kernels: self.kernels.clone(),
            dilations: self.dilations.clone(),
            channels: match self.dims {
                ConvDims::One => channels,
                ConvDims::Two => self.channels_2d,
            },
        }
    }
}

/// One MRF instance: branch kernels, per-branch dilations, working channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfSpec {
    pub dims: ConvDims,
    pub kernels: Vec<usize>,
    pub dilations: Vec<Vec<usize>>,
    pub channels: usize,
}

impl MrfSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.kernels.len() != self.dilations.len() {
            return Err(Error::Config(format!(
                "MRF has {} kernels but {} dilation lists",
                self.kernels.len(),
                self.dilations.len()
            )));
        }
        if self.kernels.iter().any(|&k| k % 2 == 0) || self.dilations.iter().flatten().any(|&d| d == 0) {
            return Err(Error::Config("MRF kernels must be odd and dilations >= 1".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("MRF needs at least one channel".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpsamplerSpec {
    pub rates: Vec<usize>,
    pub kernels: Vec<usize>,
    pub initial_channels: usize,
    /// Number of output audio channels (`n_ch`).
    pub out_channels: usize,
    pub lrelu_slope: f64,
}

impl Default for UpsamplerSpec {
    fn default() -> Self {
        Self { rates: vec![8, 8, 2, 2], kernels: vec![16, 16, 4, 4], initial_channels: 128, out_channels: 4, lrelu_slope: 0.1 }
    }
}

impl UpsamplerSpec {
    pub fn total_rate(&self) -> usize {
        self.rates.iter().product()
    }

    /// Channel count after stage `i` (halved at each upsampling).
    pub fn stage_channels(&self, i: usize) -> usize {
        self.initial_channels >> (i + 1)
    }

    pub fn validate(&self, hop: usize) -> Result<()> {
        if self.rates.is_empty() || self.rates.len() != self.kernels.len() {
            return Err(Error::Config("upsampler rates and kernels must be non-empty and equally long".into()));
        }
        if self.total_rate() != hop {
            return Err(Error::Config(format!(
                "upsampling rates {:?} multiply to {}, but STFT hop is {hop}",
                self.rates,
                self.total_rate()
            )));
        }
        for (&r, &k) in self.rates.iter().zip(&self.kernels) {
            if k < r || (k - r) % 2 != 0 {
                return Err(Error::Config(format!("upsample kernel {k} must be >= rate {r} with even difference")));
            }
        }
        if self.stage_channels(self.rates.len() - 1) == 0 || self.out_channels == 0 {
            return Err(Error::Config(format!(
                "initial channels {} too small for {} halvings",
                self.initial_channels,
                self.rates.len()
            )));
        }
        Ok(())
    }
}

/// 1D encoder-decoder over `[n_ch + 1, T]`; `widths[i]` is the channel count
/// at resolution `T / 2^i`, the last entry is the bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveUNetSpec {
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub lrelu_slope: f64,
}

impl Default for WaveUNetSpec {
    fn default() -> Self {
        Self { widths: vec![8, 16, 32, 64, 96], kernel: 5, lrelu_slope: 0.1 }
    }
}

impl WaveUNetSpec {
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) || self.kernel % 2 == 0 {
            return Err(Error::Config("wave U-Net needs >= 2 nonzero widths and an odd kernel".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskNetConfig {
    /// Strided-conv encoder, nearest-upsampling decoder with additive skips.
    Unet { channels: Vec<usize>, lrelu_slope: f64 },
    /// Residual stages with FMS scaling after each stage.
    Fms { channels: Vec<usize>, lrelu_slope: f64 },
}

impl MaskNetConfig {
    pub fn unet() -> Self {
        MaskNetConfig::Unet { channels: vec![16, 32, 64], lrelu_slope: 0.1 }
    }

    pub fn fms() -> Self {
        MaskNetConfig::Fms { channels: vec![8, 16, 8], lrelu_slope: 0.1 }
    }

    pub fn kind(&self) -> MaskNetKind {
        match self {
            MaskNetConfig::Unet { .. } => MaskNetKind::Unet,
            MaskNetConfig::Fms { .. } => MaskNetKind::Fms,
        }
    }

    pub fn channels(&self) -> &[usize] {
        match self {
            MaskNetConfig::Unet { channels, .. } | MaskNetConfig::Fms { channels, .. } => channels,
        }
    }

    pub fn lrelu_slope(&self) -> f64 {
        match self {
            MaskNetConfig::Unet { lrelu_slope, .. } | MaskNetConfig::Fms { lrelu_slope, .. } => *lrelu_slope,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub sample_rate: u32,
    pub frame: FrameConfig,
    pub mel: MelConfig,
    pub upsampler: UpsamplerSpec,
    pub mrf: MrfConfig,
    pub wave_unet: WaveUNetSpec,
    pub masknet: MaskNetConfig,
    /// Scale the input to unit peak before enhancement (and back after).
    pub peak_normalize: bool,
}

impl ModelConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            sample_rate: 16000,
            frame: FrameConfig::default(),
            mel: MelConfig::default(),
            upsampler: UpsamplerSpec::default(),
            mrf: match variant.mrf_dims() {
                ConvDims::One => MrfConfig::one_d(),
                ConvDims::Two => MrfConfig::two_d(),
            },
            wave_unet: WaveUNetSpec::default(),
            masknet: match variant.masknet_kind() {
                MaskNetKind::Unet => MaskNetConfig::unet(),
                MaskNetKind::Fms => MaskNetConfig::fms(),
            },
            peak_normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.masknet.kind() != self.variant.masknet_kind() {
            return Err(Error::Config(format!(
                "variant {} requires a {:?} MaskNet, config has {:?}",
                self.variant,
                self.variant.masknet_kind(),
                self.masknet.kind()
            )));
        }
        if self.mrf.dims != self.variant.mrf_dims() {
            return Err(Error::Config(format!(
                "variant {} requires {:?} MRF blocks, config has {:?}",
                self.variant,
                self.variant.mrf_dims(),
                self.mrf.dims
            )));
        }
        if self.mel.f_max > self.sample_rate as f64 / 2.0 {
            return Err(Error::Config(format!("mel f_max {} above Nyquist", self.mel.f_max)));
        }
        self.upsampler.validate(self.frame.hop())?;
        self.mrf.at(1).validate()?;
        self.wave_unet.validate()?;
        let ch = self.masknet.channels();
        if ch.is_empty() || ch.contains(&0) {
            return Err(Error::Config("MaskNet channel list must be non-empty and nonzero".into()));
        }
        Ok(())
    }
}
