//! Generator building blocks: FMS attention, MaskNets, MRF stacks, the HiFi
//! upsampler and the Wave U-Net.
//!
//! Blocks read their parameters from a [`WeightStore`] under canonical names
//! and expose a `layers` function declaring exactly which tensors they need.

pub mod fms;
pub mod masknet;
pub mod mrf;
pub mod upsampler;
pub mod wave_unet;

pub use fms::{fms_forward, FmsParams};
pub use masknet::{fms_masknet_forward, unet_masknet_forward};
pub use mrf::{mrf2d_forward, mrf_forward};
pub use upsampler::hifi_upsampler_forward;
pub use wave_unet::wave_unet_forward;

use crate::error::Result;
use crate::kernels::{self, ConvSpec};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::WeightStore;

fn params<'a, T: Scalar>(
    store: &'a WeightStore<T>,
    name: &str,
    spec: &ConvSpec,
) -> Result<(&'a RealTensor<T>, Option<&'a RealTensor<T>>)> {
    let w = store.require(&format!("{name}.weight"))?;
    let b = if spec.bias { Some(store.require(&format!("{name}.bias"))?) } else { None };
    Ok((w, b))
}

pub(crate) fn conv1d<T: Scalar>(store: &WeightStore<T>, name: &str, spec: &ConvSpec, x: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (w, b) = params(store, name, spec)?;
    kernels::conv1d(x, spec, w, b)
}

pub(crate) fn conv2d<T: Scalar>(store: &WeightStore<T>, name: &str, spec: &ConvSpec, x: &RealTensor<T>) -> Result<RealTensor<T>> {
    let (w, b) = params(store, name, spec)?;
    kernels::conv2d(x, spec, w, b)
}

pub(crate) fn conv_transpose1d<T: Scalar>(
    store: &WeightStore<T>,
    name: &str,
    spec: &ConvSpec,
    x: &RealTensor<T>,
) -> Result<RealTensor<T>> {
    let (w, b) = params(store, name, spec)?;
    kernels::conv_transpose1d(x, spec, w, b)
}

pub(crate) fn lrelu<T: Scalar>(x: &RealTensor<T>, slope: f64) -> RealTensor<T> {
    kernels::leaky_relu(x, T::from_acc(slope))
}

/// Zero-pads the last axis on the right up to `len`.
pub(crate) fn pad_last<T: Scalar>(x: &RealTensor<T>, len: usize) -> RealTensor<T> {
    let shape = x.shape();
    let cur = *shape.last().unwrap();
    if cur == len {
        return x.clone();
    }
    let rows = x.len() / cur;
    let mut data = vec![T::zero(); rows * len];
    for r in 0..rows {
        let n = cur.min(len);
        data[r * len..r * len + n].copy_from_slice(&x.data()[r * cur..r * cur + n]);
    }
    let mut s = shape.to_vec();
    *s.last_mut().unwrap() = len;
    RealTensor::from_parts_unchecked(s, data)
}

/// Zero-pads (or crops) the last two axes of a rank-3 tensor to `rows x cols`.
pub(crate) fn resize_plane<T: Scalar>(x: &RealTensor<T>, rows: usize, cols: usize) -> RealTensor<T> {
    let (c, f, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if (f, t) == (rows, cols) {
        return x.clone();
    }
    let mut data = vec![T::zero(); c * rows * cols];
    for ch in 0..c {
        for r in 0..rows.min(f) {
            let n = cols.min(t);
            let src = &x.data()[(ch * f + r) * t..][..n];
            data[(ch * rows + r) * cols..][..n].copy_from_slice(src);
        }
    }
    RealTensor::from_parts_unchecked(vec![c, rows, cols], data)
}
