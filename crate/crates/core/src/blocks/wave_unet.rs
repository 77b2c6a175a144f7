//! 1D Wave U-Net that repairs the multichannel upsampler output using the
//! noisy waveform. Channel 0 of the input is the waveform and is added back
//! to the output.

use crate::config::WaveUNetSpec;
use crate::error::{Error, Result};
use crate::kernels::ConvSpec;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::{LayerDecl, WeightStore};

pub(crate) fn plan(in_channels: usize, spec: &WaveUNetSpec) -> Vec<(String, ConvSpec, bool)> {
    let w = &spec.widths;
    let k = spec.kernel;
    let depth = spec.depth();
    let conv = |cin, cout| ConvSpec::conv1d(cin, cout, k).same();
    let resample = |cin, cout| ConvSpec::conv1d(cin, cout, 4).stride(&[2]).padding(&[1]);
    let mut p = vec![("waveunet.in".to_string(), conv(in_channels, w[0]), false)];
    for i in 0..depth {
        p.push((format!("waveunet.enc{i}"), conv(w[i], w[i]), false));
        p.push((format!("waveunet.down{i}"), resample(w[i], w[i + 1]), false));
    }
    p.push(("waveunet.bottleneck".to_string(), conv(w[depth], w[depth]), false));
    for i in (0..depth).rev() {
        p.push((format!("waveunet.up{i}"), resample(w[i + 1], w[i]), true));
        p.push((format!("waveunet.dec{i}"), conv(2 * w[i], w[i]), false));
    }
    p.push(("waveunet.out".to_string(), ConvSpec::conv1d(w[0], 1, 1), false));
    p
}

pub fn layers(in_channels: usize, spec: &WaveUNetSpec) -> Vec<LayerDecl> {
    plan(in_channels, spec)
        .into_iter()
        .map(|(name, s, transposed)| if transposed { LayerDecl::conv_transpose(name, s) } else { LayerDecl::conv(name, s) })
        .collect()
}

/// Length the input is zero-padded to internally.
pub(crate) fn padded_len(len: usize, depth: usize) -> usize {
    len.div_ceil(1 << depth) << depth
}

/// `[n_ch + 1, T]` -> `[1, T]`.
pub fn wave_unet_forward<T: Scalar>(stacked: &RealTensor<T>, spec: &WaveUNetSpec, store: &WeightStore<T>) -> Result<RealTensor<T>> {
    stacked.expect_rank(2, "wave U-Net input")?;
    spec.validate()?;
    let (cin, len) = (stacked.shape()[0], stacked.shape()[1]);
    let depth = spec.depth();
    let plan = plan(cin, spec);
    let layer = |name: &str, x: &RealTensor<T>| -> Result<RealTensor<T>> {
        let (_, s, transposed) = plan.iter().find(|(n, ..)| n == name).ok_or_else(|| Error::Config(format!("no layer {name}")))?;
        let y = if *transposed { super::conv_transpose1d(store, name, s, x)? } else { super::conv1d(store, name, s, x)? };
        Ok(y)
    };
    let act = |x: RealTensor<T>| super::lrelu(&x, spec.lrelu_slope);

    let input = super::pad_last(stacked, padded_len(len, depth));
    let mut x = act(layer("waveunet.in", &input)?);
    let mut skips = Vec::with_capacity(depth);
    for i in 0..depth {
        x = act(layer(&format!("waveunet.enc{i}"), &x)?);
        skips.push(x.clone());
        x = act(layer(&format!("waveunet.down{i}"), &x)?);
    }
    x = act(layer("waveunet.bottleneck", &x)?);
    for i in (0..depth).rev() {
        x = act(layer(&format!("waveunet.up{i}"), &x)?);
        x = RealTensor::concat_outer(&[&x, &skips[i]])?;
        x = act(layer(&format!("waveunet.dec{i}"), &x)?);
    }
    let y = layer("waveunet.out", &x)?;
    let out: Vec<T> = y.data()[..len].iter().zip(&stacked.outer(0)[..len]).map(|(&a, &b)| a + b).collect();
    RealTensor::new(vec![1, len], out)
}
