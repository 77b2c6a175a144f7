//! Mono RIFF WAV in 16-bit PCM or 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal::AudioBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

fn wav_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Wav(format!("{}: {e}", path.display()))
}

/// Reads a mono file; integer samples are scaled to [-1, 1).
pub fn read_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(path, format!("expected a mono file, found {} channels", spec.channels)));
    }
    let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| T::from_acc(v as f64)))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        (SampleFormat::Int, bits @ 8..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| T::from_acc(v as f64 / scale)))
                .collect::<Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
        (fmt, bits) => return Err(wav_err(path, format!("unsupported sample format {fmt:?} with {bits} bits"))),
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes a mono file. PCM16 output clips to [-1, 1] and rounds to the
/// nearest step of 1/32768.
pub fn write_wav<T: Scalar>(path: impl AsRef<Path>, audio: &AudioBuffer<T>, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec { channels: 1, sample_rate: audio.sample_rate(), bits_per_sample: bits, sample_format };
    let mut w = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in audio.samples() {
        let v = s.to_acc();
        match format {
            WavFormat::Pcm16 => w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
            WavFormat::Float32 => w.write_sample(v as f32),
        }
        .map_err(|e| wav_err(path, e))?;
    }
    w.finalize().map_err(|e| wav_err(path, e))
}
