//! Streaming spectral-masking speech enhancement.
//!
//! The crate implements four GAN generator variants (1D/2D multi-receptive
//! field upsamplers combined with a U-Net or a feature-map-scaling MaskNet),
//! offline and chunked streaming inference, parameter/MAC accounting, and the
//! SDR, SI-SDR and STOI objective metrics.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the `f32` engine used by the command-line tool.

pub mod blocks;
pub mod config;
pub mod error;
pub mod generator;
pub mod instrument;
pub mod io;
pub mod kernels;
pub mod metrics;
#[doc(hidden)]
pub mod oracle;
pub mod profiler;
pub mod scalar;
pub mod selftest;
pub mod signal;
pub mod streaming;
pub mod tensor;
pub mod weights;

pub use config::{ConvDims, MaskNetConfig, MaskNetKind, ModelConfig, MrfConfig, MrfSpec, UpsamplerSpec, Variant, WaveUNetSpec};
pub use error::{Error, Result};
pub use generator::{build_model, init_random, GeneratorModel};
pub use kernels::ConvSpec;
pub use metrics::{MetricValue, MetricsReport};
pub use profiler::ProfileReport;
pub use scalar::Scalar;
pub use signal::{AudioBuffer, ComplexSpectrogram, FrameConfig, MaskMatrix};
pub use streaming::ChunkPlan;
pub use tensor::RealTensor;
pub use weights::WeightStore;

pub type Tensor = RealTensor<f32>;
pub type Audio = AudioBuffer<f32>;
pub type Spectrogram = ComplexSpectrogram<f32>;
pub type Mask = MaskMatrix<f32>;
pub type Weights = WeightStore<f32>;
pub type Model = GeneratorModel<f32>;

pub type Tensor64 = RealTensor<f64>;
pub type Audio64 = AudioBuffer<f64>;
pub type Model64 = GeneratorModel<f64>;
