//! Spectral MaskNets: both map `[1, F, M]` magnitude features to a `[0, 1]`
//! gain per time-frequency bin.

use crate::config::MaskNetConfig;
use crate::error::{Error, Result};
use crate::kernels::{sigmoid, ConvSpec};
use crate::scalar::Scalar;
use crate::signal::MaskMatrix;
use crate::tensor::RealTensor;
use crate::weights::{LayerDecl, WeightStore};

use super::fms::{fms_forward, FmsParams};

pub(crate) fn conv3(cin: usize, cout: usize) -> ConvSpec {
    ConvSpec::conv2d(cin, cout, [3, 3]).same()
}

pub(crate) fn conv1x1(cin: usize, cout: usize) -> ConvSpec {
    ConvSpec::conv2d(cin, cout, [1, 1])
}

fn down(cin: usize, cout: usize) -> ConvSpec {
    ConvSpec::conv2d(cin, cout, [3, 3]).stride(&[2, 2]).padding(&[1, 1])
}

/// Residual stage channel pairs `(in, out)`, starting from one input channel.
pub(crate) fn stage_io(channels: &[usize]) -> Vec<(usize, usize)> {
    std::iter::once(1).chain(channels.iter().copied()).zip(channels.iter().copied()).collect()
}

pub fn layers(cfg: &MaskNetConfig) -> Vec<LayerDecl> {
    match cfg {
        MaskNetConfig::Fms { channels, .. } => {
            let mut out = Vec::new();
            for (i, (cin, cout)) in stage_io(channels).into_iter().enumerate() {
                let s = i + 1;
                out.push(LayerDecl::conv(format!("masknet.stage{s}.conv1"), conv3(cin, cout)));
                out.push(LayerDecl::conv(format!("masknet.stage{s}.conv2"), conv3(cout, cout)));
                if cin != cout {
                    out.push(LayerDecl::conv(format!("masknet.stage{s}.skip"), conv1x1(cin, cout)));
                }
                out.push(LayerDecl::scale(format!("masknet.fms.{i}"), cout));
            }
            out.push(LayerDecl::conv("masknet.out", conv1x1(*channels.last().unwrap(), 1)));
            out
        }
        MaskNetConfig::Unet { channels, .. } => unet_plan(channels).into_iter().map(|(name, spec)| LayerDecl::conv(name, spec)).collect(),
    }
}

/// Ordered `(name, spec)` list of the U-Net convolutions.
pub(crate) fn unet_plan(ch: &[usize]) -> Vec<(String, ConvSpec)> {
    let depth = ch.len();
    let next = |i: usize| ch[(i + 1).min(depth - 1)];
    let mut plan = vec![("masknet.in".to_string(), conv3(1, ch[0]))];
    for i in 0..depth {
        if i > 0 {
            plan.push((format!("masknet.enc{i}.conv"), conv3(ch[i], ch[i])));
        }
        plan.push((format!("masknet.down{i}"), down(ch[i], next(i))));
    }
    plan.push(("masknet.bottleneck".to_string(), conv3(ch[depth - 1], ch[depth - 1])));
    for i in (0..depth).rev() {
        plan.push((format!("masknet.up{i}"), conv1x1(next(i), ch[i])));
        if i > 0 {
            plan.push((format!("masknet.dec{i}.conv"), conv3(ch[i], ch[i])));
        }
    }
    plan.push(("masknet.out".to_string(), conv1x1(ch[0], 1)));
    plan
}

fn check_features<T: Scalar>(x: &RealTensor<T>) -> Result<(usize, usize)> {
    x.expect_rank(3, "masknet features")?;
    if x.shape()[0] != 1 {
        return Err(Error::shape("masknet features", format!("expected 1 channel, got {}", x.shape()[0])));
    }
    Ok((x.shape()[1], x.shape()[2]))
}

fn to_mask<T: Scalar>(logits: &RealTensor<T>, bins: usize, frames: usize) -> Result<MaskMatrix<T>> {
    if !logits.all_finite() {
        return Err(Error::NonFinite("mask logits"));
    }
    MaskMatrix::new(bins, frames, sigmoid(logits).into_data())
}

/// Residual FMS MaskNet: per stage `conv -> lrelu -> conv`, plus a (1x1
/// projected when channels change) skip, then FMS; a final 1x1 conv and sigmoid.
pub fn fms_masknet_forward<T: Scalar>(features: &RealTensor<T>, cfg: &MaskNetConfig, store: &WeightStore<T>) -> Result<MaskMatrix<T>> {
    let MaskNetConfig::Fms { channels, lrelu_slope } = cfg else {
        return Err(Error::Config("fms_masknet_forward needs an FMS MaskNet config".into()));
    };
    let (bins, frames) = check_features(features)?;
    let mut x = features.clone();
    for (i, (cin, cout)) in stage_io(channels).into_iter().enumerate() {
        let s = i + 1;
        let h = super::conv2d(store, &format!("masknet.stage{s}.conv1"), &conv3(cin, cout), &x)?;
        let h = super::conv2d(store, &format!("masknet.stage{s}.conv2"), &conv3(cout, cout), &super::lrelu(&h, *lrelu_slope))?;
        let skip = if cin != cout {
            super::conv2d(store, &format!("masknet.stage{s}.skip"), &conv1x1(cin, cout), &x)?
        } else {
            x
        };
        let params = FmsParams::from_store(store, &format!("masknet.fms.{i}"))?;
        x = fms_forward(&h.add(&skip)?, &params)?;
    }
    let logits = super::conv2d(store, "masknet.out", &conv1x1(*channels.last().unwrap(), 1), &x)?;
    to_mask(&logits, bins, frames)
}

/// Nearest-neighbour 2x upsampling of the last two axes.
fn upsample2<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    let (c, f, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut out = RealTensor::zeros(&[c, 2 * f, 2 * t]);
    let dst = out.data_mut();
    for ch in 0..c {
        for r in 0..2 * f {
            let src = &x.data()[(ch * f + r / 2) * t..][..t];
            let row = &mut dst[(ch * 2 * f + r) * 2 * t..][..2 * t];
            for (j, v) in row.iter_mut().enumerate() {
                *v = src[j / 2];
            }
        }
    }
    out
}

/// Grid size the U-Net pads its input to: next multiple of `2^depth`.
pub(crate) fn unet_padded(len: usize, depth: usize) -> usize {
    let m = 1 << depth;
    len.div_ceil(m) * m
}

/// U-Net MaskNet: strided-conv encoder, nearest-upsample + 1x1 conv decoder
/// with additive skips. Inputs are zero-padded to a multiple of `2^depth` and
/// the mask is cropped back.
pub fn unet_masknet_forward<T: Scalar>(features: &RealTensor<T>, cfg: &MaskNetConfig, store: &WeightStore<T>) -> Result<MaskMatrix<T>> {
    let MaskNetConfig::Unet { channels, lrelu_slope } = cfg else {
        return Err(Error::Config("unet_masknet_forward needs a U-Net MaskNet config".into()));
    };
    let (bins, frames) = check_features(features)?;
    let depth = channels.len();
    let plan = unet_plan(channels);
    let spec_of = |name: &str| &plan.iter().find(|(n, _)| n == name).expect("planned layer").1;
    let conv = |name: &str, x: &RealTensor<T>| super::conv2d(store, name, spec_of(name), x);
    let act = |x: RealTensor<T>| super::lrelu(&x, *lrelu_slope);

    let padded = super::resize_plane(features, unet_padded(bins, depth), unet_padded(frames, depth));
    let mut x = act(conv("masknet.in", &padded)?);
    let mut skips = Vec::with_capacity(depth);
    for i in 0..depth {
        if i > 0 {
            x = act(conv(&format!("masknet.enc{i}.conv"), &x)?);
        }
        skips.push(x.clone());
        x = act(conv(&format!("masknet.down{i}"), &x)?);
    }
    x = act(conv("masknet.bottleneck", &x)?);
    for i in (0..depth).rev() {
        // 1x1 conv commutes with nearest upsampling; run it at the coarse scale
        x = upsample2(&conv(&format!("masknet.up{i}"), &x)?).add(&skips[i])?;
        x = if i > 0 { act(conv(&format!("masknet.dec{i}.conv"), &act(x))?) } else { act(x) };
    }
    let logits = conv("masknet.out", &x)?;
    let logits = super::resize_plane(&logits, bins, frames);
    to_mask(&logits, bins, frames)
}
