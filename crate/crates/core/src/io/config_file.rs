//! Model configuration files: flat `key = value` TOML. Only `variant` is
//! required; every other key overrides that variant's default.
//!
//! ```text
//! variant = "hifi_stream"
//! sample_rate = 16000
//! n_fft = 1024
//! hop = 256
//! win_length = 1024
//! n_mels = 80
//! f_min = 0.0
//! f_max = 8000.0
//! peak_normalize = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::signal::FrameConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    variant: String,
    sample_rate: Option<u32>,
    n_fft: Option<usize>,
    hop: Option<usize>,
    win_length: Option<usize>,
    n_mels: Option<usize>,
    f_min: Option<f64>,
    f_max: Option<f64>,
    peak_normalize: Option<bool>,
}

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let variant: Variant = file.variant.parse()?;
    let mut cfg = ModelConfig::for_variant(variant);
    if let Some(sr) = file.sample_rate {
        cfg.sample_rate = sr;
    }
    let f = cfg.frame;
    if file.n_fft.is_some() || file.hop.is_some() || file.win_length.is_some() {
        let n_fft = file.n_fft.unwrap_or(f.n_fft());
        cfg.frame = FrameConfig::new(n_fft, file.hop.unwrap_or(f.hop()), file.win_length.unwrap_or(n_fft), f.center())?;
    }
    if let Some(n) = file.n_mels {
        cfg.mel.n_mels = n;
    }
    if let Some(v) = file.f_min {
        cfg.mel.f_min = v;
    }
    if let Some(v) = file.f_max {
        cfg.mel.f_max = v;
    }
    if let Some(p) = file.peak_normalize {
        cfg.peak_normalize = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// The file form of `cfg` (all overridable keys written out).
pub fn render_config(cfg: &ModelConfig) -> String {
    let file = ConfigFile {
        variant: cfg.variant.to_string(),
        sample_rate: Some(cfg.sample_rate),
        n_fft: Some(cfg.frame.n_fft()),
        hop: Some(cfg.frame.hop()),
        win_length: Some(cfg.frame.win_length()),
        n_mels: Some(cfg.mel.n_mels),
        f_min: Some(cfg.mel.f_min),
        f_max: Some(cfg.mel.f_max),
        peak_normalize: Some(cfg.peak_normalize),
    };
    toml::to_string(&file).expect("flat config serializes")
}
