//! Chunked stream simulation: the input is cut into disjoint fixed-length
//! chunks, each is enhanced with no state from its neighbours, and the results
//! are concatenated in order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::GeneratorModel;
use crate::metrics::{self, MetricsReport};
use crate::scalar::Scalar;
use crate::signal::{AudioBuffer, FrameConfig};

pub const DEFAULT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkPlan {
    chunk_len: usize,
}

impl ChunkPlan {
    /// Disjoint chunks of `chunk_len` samples; must cover at least one FFT frame.
    pub fn new(chunk_len: usize, frame: &FrameConfig) -> Result<Self> {
        if chunk_len < frame.n_fft() {
            return Err(Error::Config(format!("chunk of {chunk_len} samples is shorter than n_fft {}", frame.n_fft())));
        }
        Ok(Self { chunk_len })
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk_len
    }

    /// Always zero: chunks never overlap.
    pub fn overlap(&self) -> usize {
        0
    }

    /// Algorithmic latency of waiting for one full chunk, in milliseconds.
    pub fn latency_ms(&self, sample_rate: u32) -> f64 {
        1000.0 * self.chunk_len as f64 / sample_rate as f64
    }
}

impl Default for ChunkPlan {
    fn default() -> Self {
        Self { chunk_len: DEFAULT_CHUNK }
    }
}

/// Consecutive disjoint chunks covering `y`; the last one may be shorter.
pub fn split<T: Scalar>(y: &AudioBuffer<T>, plan: &ChunkPlan) -> Vec<AudioBuffer<T>> {
    y.samples()
        .chunks(plan.chunk_len)
        .map(|c| AudioBuffer::from_parts_unchecked(c.to_vec(), y.sample_rate()))
        .collect()
}

/// Enhances every chunk independently and joins the outputs. The short final
/// chunk is processed as-is, without padding.
pub fn process_stream<T: Scalar>(model: &GeneratorModel<T>, y: &AudioBuffer<T>, plan: &ChunkPlan) -> Result<AudioBuffer<T>> {
    if y.sample_rate() != model.config().sample_rate {
        return Err(Error::SampleRate { expected: model.config().sample_rate, actual: y.sample_rate() });
    }
    let outputs: Vec<AudioBuffer<T>> = split(y, plan).par_iter().map(|c| model.enhance(c)).collect::<Result<_>>()?;
    let mut joined = Vec::with_capacity(y.len());
    for o in outputs {
        joined.extend_from_slice(o.samples());
    }
    Ok(AudioBuffer::from_parts_unchecked(joined, y.sample_rate()))
}

/// Offline and streaming metrics for the same utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationReport {
    pub offline: MetricsReport,
    pub streaming: MetricsReport,
}

pub fn stream_degradation_report<T: Scalar>(
    model: &GeneratorModel<T>,
    clean: &AudioBuffer<T>,
    noisy: &AudioBuffer<T>,
    plan: &ChunkPlan,
) -> Result<DegradationReport> {
    let offline = model.enhance(noisy)?;
    let streamed = process_stream(model, noisy, plan)?;
    let mut off = MetricsReport::new();
    off.push(metrics::evaluate("utterance", clean, &offline)?);
    let mut st = MetricsReport::new();
    st.push(metrics::evaluate("utterance", clean, &streamed)?);
    Ok(DegradationReport { offline: off, streaming: st })
}
