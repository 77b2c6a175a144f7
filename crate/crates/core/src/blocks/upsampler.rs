//! HiFi-GAN style upsampler: mel frames to `n_ch` waveform channels.

use crate::config::{ConvDims, MrfConfig, UpsamplerSpec};
use crate::error::{Error, Result};
use crate::kernels::{tanh, ConvSpec};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::{LayerDecl, WeightStore};

use super::mrf;

pub(crate) const PRE_POST_KERNEL: usize = 7;

pub(crate) fn pre_conv(n_mels: usize, spec: &UpsamplerSpec) -> ConvSpec {
    ConvSpec::conv1d(n_mels, spec.initial_channels, PRE_POST_KERNEL).same()
}

pub(crate) fn up_conv(spec: &UpsamplerSpec, i: usize) -> ConvSpec {
    let cin = if i == 0 { spec.initial_channels } else { spec.stage_channels(i - 1) };
    let (r, k) = (spec.rates[i], spec.kernels[i]);
    ConvSpec::conv1d(cin, spec.stage_channels(i), k).stride(&[r]).padding(&[(k - r) / 2])
}

pub(crate) fn post_conv(spec: &UpsamplerSpec) -> ConvSpec {
    ConvSpec::conv1d(spec.stage_channels(spec.rates.len() - 1), spec.out_channels, PRE_POST_KERNEL).same()
}

pub(crate) fn lift_conv(channels_2d: usize) -> ConvSpec {
    ConvSpec::conv2d(1, channels_2d, [1, 1])
}

pub(crate) fn proj_conv(channels_2d: usize) -> ConvSpec {
    ConvSpec::conv2d(channels_2d, 1, [1, 1])
}

pub fn layers(n_mels: usize, spec: &UpsamplerSpec, mrf_cfg: &MrfConfig) -> Vec<LayerDecl> {
    let mut out = vec![LayerDecl::conv("hifi.conv_pre", pre_conv(n_mels, spec))];
    for i in 0..spec.rates.len() {
        out.push(LayerDecl::conv_transpose(format!("hifi.up.{i}"), up_conv(spec, i)));
        let m = mrf_cfg.at(spec.stage_channels(i));
        if mrf_cfg.dims == ConvDims::Two {
            out.push(LayerDecl::conv(format!("hifi.mrf.{i}.lift"), lift_conv(m.channels)));
        }
        out.extend(mrf::layers(&format!("hifi.mrf.{i}"), &m));
        if mrf_cfg.dims == ConvDims::Two {
            out.push(LayerDecl::conv(format!("hifi.mrf.{i}.proj"), proj_conv(m.channels)));
        }
    }
    out.push(LayerDecl::conv("hifi.conv_post", post_conv(spec)));
    out
}

/// One MRF stage. In 2D the `[C, L]` activation is viewed as a one-channel
/// `C x L` plane, lifted, processed, projected back and added to the input.
fn mrf_stage<T: Scalar>(x: RealTensor<T>, i: usize, mrf_cfg: &MrfConfig, store: &WeightStore<T>) -> Result<RealTensor<T>> {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let spec = mrf_cfg.at(c);
    let prefix = format!("hifi.mrf.{i}");
    match mrf_cfg.dims {
        ConvDims::One => mrf::mrf_forward(&x, &spec, store, &prefix),
        ConvDims::Two => {
            let plane = x.clone().reshape(&[1, c, l])?;
            let h = super::conv2d(store, &format!("{prefix}.lift"), &lift_conv(spec.channels), &plane)?;
            let h = mrf::mrf2d_forward(&h, &spec, store, &prefix)?;
            let h = super::conv2d(store, &format!("{prefix}.proj"), &proj_conv(spec.channels), &h)?;
            x.add(&h.reshape(&[c, l])?)
        }
    }
}

/// `[n_mels, M]` -> `[n_ch, target_len]`; the `M * hop` samples produced are
/// cropped or zero-padded to `target_len`.
pub fn hifi_upsampler_forward<T: Scalar>(
    mel: &RealTensor<T>,
    spec: &UpsamplerSpec,
    mrf_cfg: &MrfConfig,
    store: &WeightStore<T>,
    target_len: usize,
) -> Result<RealTensor<T>> {
    mel.expect_rank(2, "upsampler input")?;
    if spec.rates.len() != spec.kernels.len() {
        return Err(Error::Config("upsampler rates and kernels differ in length".into()));
    }
    let n_mels = mel.shape()[0];
    let slope = spec.lrelu_slope;
    let mut x = super::conv1d(store, "hifi.conv_pre", &pre_conv(n_mels, spec), mel)?;
    for i in 0..spec.rates.len() {
        x = super::conv_transpose1d(store, &format!("hifi.up.{i}"), &up_conv(spec, i), &super::lrelu(&x, slope))?;
        x = mrf_stage(x, i, mrf_cfg, store)?;
    }
    let x = super::conv1d(store, "hifi.conv_post", &post_conv(spec), &super::lrelu(&x, slope))?;
    Ok(super::pad_last(&tanh(&x), target_len))
}
