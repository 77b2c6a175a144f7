//! Multi-receptive-field residual stacks in 1D and 2D.
//!
//! Each branch `b` repeats, for every dilation `d` in its list,
//! `h += conv(lrelu(conv_d(lrelu(h))))`; the block returns the mean of the
//! branch outputs.

use crate::config::{ConvDims, MrfSpec};
use crate::error::{Error, Result};
use crate::kernels::ConvSpec;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::{LayerDecl, WeightStore};

pub(crate) const LRELU_SLOPE: f64 = 0.1;

/// `(dilated conv, plain conv)` geometry for branch `b`, layer `j`.
pub(crate) fn conv_pair(spec: &MrfSpec, b: usize, j: usize) -> (ConvSpec, ConvSpec) {
    let (k, d, c) = (spec.kernels[b], spec.dilations[b][j], spec.channels);
    match spec.dims {
        ConvDims::One => (ConvSpec::conv1d(c, c, k).dilation(&[d]).same(), ConvSpec::conv1d(c, c, k).same()),
        ConvDims::Two => (
            ConvSpec::conv2d(c, c, [k, k]).dilation(&[1, d]).same(),
            ConvSpec::conv2d(c, c, [k, k]).same(),
        ),
    }
}

pub fn layers(prefix: &str, spec: &MrfSpec) -> Vec<LayerDecl> {
    let mut out = Vec::new();
    for (b, dils) in spec.dilations.iter().enumerate() {
        for j in 0..dils.len() {
            let (c1, c2) = conv_pair(spec, b, j);
            out.push(LayerDecl::conv(format!("{prefix}.{b}.{j}.conv1"), c1));
            out.push(LayerDecl::conv(format!("{prefix}.{b}.{j}.conv2"), c2));
        }
    }
    out
}

fn run<T: Scalar>(x: &RealTensor<T>, spec: &MrfSpec, store: &WeightStore<T>, prefix: &str) -> Result<RealTensor<T>> {
    spec.validate()?;
    let conv = |name: &str, s: &ConvSpec, t: &RealTensor<T>| match spec.dims {
        ConvDims::One => super::conv1d(store, name, s, t),
        ConvDims::Two => super::conv2d(store, name, s, t),
    };
    // mean over branches, written as x + mean(branch - x) so that all-zero
    // convolutions return x bitwise
    let mut delta = vec![0.0f64; x.len()];
    for (b, dils) in spec.dilations.iter().enumerate() {
        let mut h = x.clone();
        for j in 0..dils.len() {
            let (c1, c2) = conv_pair(spec, b, j);
            let t = conv(&format!("{prefix}.{b}.{j}.conv1"), &c1, &super::lrelu(&h, LRELU_SLOPE))?;
            let t = conv(&format!("{prefix}.{b}.{j}.conv2"), &c2, &super::lrelu(&t, LRELU_SLOPE))?;
            h = h.add(&t)?;
        }
        for ((d, &hv), &xv) in delta.iter_mut().zip(h.data()).zip(x.data()) {
            *d += hv.to_acc() - xv.to_acc();
        }
    }
    let n = spec.kernels.len() as f64;
    let data = x.data().iter().zip(&delta).map(|(&v, &d)| T::from_acc(v.to_acc() + d / n)).collect();
    RealTensor::new(x.shape().to_vec(), data)
}

/// 1D MRF over `[C, L]`; output has the input's shape.
pub fn mrf_forward<T: Scalar>(x: &RealTensor<T>, spec: &MrfSpec, store: &WeightStore<T>, prefix: &str) -> Result<RealTensor<T>> {
    if spec.dims != ConvDims::One {
        return Err(Error::Config("mrf_forward needs a 1D spec".into()));
    }
    x.expect_rank(2, "mrf input")?;
    if x.shape()[0] != spec.channels {
        return Err(Error::shape("mrf", format!("input channels: expected {}, got {}", spec.channels, x.shape()[0])));
    }
    run(x, spec, store, prefix)
}

/// 2D MRF over `[C, F', L']`; output has the input's shape.
pub fn mrf2d_forward<T: Scalar>(x: &RealTensor<T>, spec: &MrfSpec, store: &WeightStore<T>, prefix: &str) -> Result<RealTensor<T>> {
    if spec.dims != ConvDims::Two {
        return Err(Error::Config("mrf2d_forward needs a 2D spec".into()));
    }
    x.expect_rank(3, "mrf2d input")?;
    if x.shape()[0] != spec.channels {
        return Err(Error::shape("mrf2d", format!("input channels: expected {}, got {}", spec.channels, x.shape()[0])));
    }
    run(x, spec, store, prefix)
}
