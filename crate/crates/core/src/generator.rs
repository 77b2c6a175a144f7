//! End-to-end generator: STFT -> mel -> HiFi upsampler -> Wave U-Net ->
//! spectral MaskNet -> masked iSTFT.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::blocks::{self, masknet, upsampler, wave_unet};
use crate::config::{MaskNetConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::{self, AudioBuffer, ComplexSpectrogram, MaskMatrix, StftProcessor};
use crate::tensor::RealTensor;
use crate::weights::{check_against, LayerDecl, WeightStore};

/// Standard deviation of [`init_random`] draws.
pub const INIT_STD: f64 = 0.01;

/// Every layer the configuration demands, in forward order.
pub fn manifest(config: &ModelConfig) -> Vec<LayerDecl> {
    let mut layers = upsampler::layers(config.mel.n_mels, &config.upsampler, &config.mrf);
    layers.extend(wave_unet::layers(config.upsampler.out_channels + 1, &config.wave_unet));
    layers.extend(masknet::layers(&config.masknet));
    layers
}

/// Deterministic `N(0, 0.01)` weights for every tensor in the manifest.
pub fn init_random<T: Scalar>(config: &ModelConfig, seed: u64) -> Result<WeightStore<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut store = WeightStore::new();
    for layer in manifest(config) {
        for (name, shape) in layer.tensors() {
            let t = RealTensor::from_fn(&shape, |_| T::from_acc(normal.sample(&mut rng)));
            store.insert(name, t);
        }
    }
    Ok(store)
}

/// All-zero weights except the MaskNet output bias, which saturates the
/// sigmoid: the mask is identically one and the Wave U-Net passes the input
/// through, so the model reduces to an STFT round trip.
pub fn passthrough_weights<T: Scalar>(config: &ModelConfig) -> Result<WeightStore<T>> {
    config.validate()?;
    let mut store = WeightStore::new();
    for layer in manifest(config) {
        for (name, shape) in layer.tensors() {
            store.insert(name, RealTensor::zeros(&shape));
        }
    }
    store.insert("masknet.out.bias", RealTensor::filled(&[1], T::from_acc(40.0)));
    Ok(store)
}

/// Intermediate signals of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `[n_ch, T]` upsampler output.
    pub multichannel: RealTensor<T>,
    /// Wave U-Net output.
    pub refined: AudioBuffer<T>,
    pub refined_spec: ComplexSpectrogram<T>,
    pub mask: MaskMatrix<T>,
    pub masked_spec: ComplexSpectrogram<T>,
    pub output: AudioBuffer<T>,
}

/// A validated configuration plus matching weights. Immutable; `enhance` may
/// run concurrently from several threads.
pub struct GeneratorModel<T: Scalar> {
    config: ModelConfig,
    weights: WeightStore<T>,
    mel_bank: RealTensor<T>,
    stft: StftProcessor<T>,
}

impl<T: Scalar> std::fmt::Debug for GeneratorModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorModel")
            .field("variant", &self.config.variant)
            .field("tensors", &self.weights.len())
            .finish()
    }
}

/// Validates every tensor the configuration needs; all discrepancies are
/// reported together.
pub fn build_model<T: Scalar>(config: ModelConfig, weights: WeightStore<T>) -> Result<GeneratorModel<T>> {
    config.validate()?;
    let problems = check_against(&weights, &manifest(&config));
    if !problems.is_empty() {
        return Err(Error::Weights(problems));
    }
    let mel_bank = signal::mel_filterbank(
        config.frame.bins(),
        config.mel.n_mels,
        config.sample_rate,
        config.mel.f_min,
        config.mel.f_max,
    )?;
    let stft = StftProcessor::new(config.frame);
    Ok(GeneratorModel { config, weights, mel_bank, stft })
}

impl<T: Scalar> GeneratorModel<T> {
    pub fn random(config: ModelConfig, seed: u64) -> Result<Self> {
        let w = init_random(&config, seed)?;
        build_model(config, w)
    }

    pub fn passthrough(config: ModelConfig) -> Result<Self> {
        let w = passthrough_weights(&config)?;
        build_model(config, w)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    pub fn enhance(&self, y: &AudioBuffer<T>) -> Result<AudioBuffer<T>> {
        self.enhance_traced(y).map(|t| t.output)
    }

    pub fn enhance_traced(&self, y: &AudioBuffer<T>) -> Result<Trace<T>> {
        let cfg = &self.config;
        if y.sample_rate() != cfg.sample_rate {
            return Err(Error::SampleRate { expected: cfg.sample_rate, actual: y.sample_rate() });
        }
        if y.is_empty() {
            return Err(Error::Empty("enhance input"));
        }
        let peak = if cfg.peak_normalize {
            y.samples().iter().fold(0.0f64, |m, v| m.max(v.to_acc().abs()))
        } else {
            0.0
        };
        let scaled;
        let y = if peak > 0.0 {
            scaled = AudioBuffer::new(y.samples().iter().map(|&v| T::from_acc(v.to_acc() / peak)).collect(), y.sample_rate())?;
            &scaled
        } else {
            y
        };
        let len = y.len();
        let rate = y.sample_rate();

        let noisy_spec = self.stft.stft(y)?;
        let mel = signal::mel_spectrogram(&noisy_spec, &self.mel_bank)?;
        let multichannel = blocks::hifi_upsampler_forward(&mel, &cfg.upsampler, &cfg.mrf, &self.weights, len)?;

        let wave = RealTensor::new(vec![1, len], y.samples().to_vec())?;
        let stacked = RealTensor::concat_outer(&[&wave, &multichannel])?;
        let refined = blocks::wave_unet_forward(&stacked, &cfg.wave_unet, &self.weights)?;
        if !refined.all_finite() {
            return Err(Error::NonFinite("wave U-Net output"));
        }
        let refined = AudioBuffer::from_parts_unchecked(refined.into_data(), rate);

        let refined_spec = self.stft.stft(&refined)?;
        let (bins, frames) = (refined_spec.bins(), refined_spec.frames());
        let features = refined_spec.magnitude().map(|v| v.ln_1p()).reshape(&[1, bins, frames])?;
        let mask = match &cfg.masknet {
            MaskNetConfig::Fms { .. } => blocks::fms_masknet_forward(&features, &cfg.masknet, &self.weights),
            MaskNetConfig::Unet { .. } => blocks::unet_masknet_forward(&features, &cfg.masknet, &self.weights),
        }?;
        let masked_spec = signal::apply_mask(&refined_spec, &mask)?;
        let mut output = self.stft.istft(&masked_spec, rate)?;
        if peak > 0.0 {
            output = AudioBuffer::from_parts_unchecked(
                output.samples().iter().map(|&v| T::from_acc(v.to_acc() * peak)).collect(),
                rate,
            );
        }
        if output.samples().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("enhanced audio"));
        }
        Ok(Trace { multichannel, refined, refined_spec, mask, masked_spec, output })
    }
}
