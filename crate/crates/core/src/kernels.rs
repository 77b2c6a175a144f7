//! Dense CPU kernels: 1D/2D convolution, 1D transposed convolution,
//! activations and the affine map.
//!
//! All convolutions use the cross-correlation convention (no kernel flip) and
//! the `[out, in / groups, k...]` weight layout, so converted checkpoints apply
//! unchanged. Transposed convolution weights use `[in, out / groups, k]`.
//! Products are accumulated in `f64` and rounded once per output element.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

/// Geometry of a convolution layer. Spatial vectors have one entry per
/// convolved axis: `[len]` for 1D, `[freq, time]` for 2D.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub dilation: Vec<usize>,
    pub padding: Vec<usize>,
    pub groups: usize,
    pub bias: bool,
}

impl ConvSpec {
    pub fn conv1d(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::with_kernel(in_channels, out_channels, vec![kernel])
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: [usize; 2]) -> Self {
        Self::with_kernel(in_channels, out_channels, kernel.to_vec())
    }

    fn with_kernel(in_channels: usize, out_channels: usize, kernel: Vec<usize>) -> Self {
        let n = kernel.len();
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: vec![1; n],
            dilation: vec![1; n],
            padding: vec![0; n],
            groups: 1,
            bias: true,
        }
    }

    pub fn stride(mut self, stride: &[usize]) -> Self {
        self.stride = stride.to_vec();
        self
    }

    pub fn dilation(mut self, dilation: &[usize]) -> Self {
        self.dilation = dilation.to_vec();
        self
    }

    pub fn padding(mut self, padding: &[usize]) -> Self {
        self.padding = padding.to_vec();
        self
    }

    /// Padding that keeps the length unchanged at stride 1 (odd kernels).
    pub fn same(mut self) -> Self {
        self.padding = self
            .kernel
            .iter()
            .zip(&self.dilation)
            .map(|(&k, &d)| d * (k - 1) / 2)
            .collect();
        self
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn spatial_dims(&self) -> usize {
        self.kernel.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.kernel.len();
        let bad = |msg: String| Err(Error::Config(format!("conv spec: {msg}")));
        if n == 0 || n > 2 {
            return bad(format!("{n} spatial dims"));
        }
        if self.stride.len() != n || self.dilation.len() != n || self.padding.len() != n {
            return bad("stride/dilation/padding rank differs from kernel rank".into());
        }
        if self.groups == 0
            || self.in_channels == 0
            || self.out_channels == 0
            || self.in_channels % self.groups != 0
            || self.out_channels % self.groups != 0
        {
            return bad(format!(
                "channels {}->{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            ));
        }
        if self.kernel.iter().chain(&self.stride).chain(&self.dilation).any(|&v| v == 0) {
            return bad("kernel, stride and dilation must be >= 1".into());
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.out_channels, self.in_channels / self.groups];
        s.extend_from_slice(&self.kernel);
        s
    }

    pub fn transposed_weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.in_channels, self.out_channels / self.groups];
        s.extend_from_slice(&self.kernel);
        s
    }

    /// Weight + bias element count (identical for the transposed layout).
    pub fn param_count(&self) -> usize {
        self.out_channels * (self.in_channels / self.groups) * self.kernel.iter().product::<usize>()
            + if self.bias { self.out_channels } else { 0 }
    }

    /// Output extent along `axis`, or `None` when the input is shorter than
    /// the dilated kernel.
    pub fn output_len(&self, axis: usize, len: usize) -> Option<usize> {
        let span = self.dilation[axis] * (self.kernel[axis] - 1) + 1;
        let padded = len + 2 * self.padding[axis];
        (padded >= span).then(|| (padded - span) / self.stride[axis] + 1)
    }

    pub fn transposed_output_len(&self, len: usize) -> Option<usize> {
        let full = (len - 1) * self.stride[0] + self.dilation[0] * (self.kernel[0] - 1) + 1;
        full.checked_sub(2 * self.padding[0]).filter(|&l| l > 0)
    }

    /// MACs one conv layer performs per output element.
    pub fn macs_per_output(&self) -> usize {
        (self.in_channels / self.groups) * self.kernel.iter().product::<usize>()
    }
}

fn check_rank(spec: &ConvSpec, dims: usize, op: &'static str) -> Result<()> {
    spec.validate()?;
    if spec.spatial_dims() != dims {
        return Err(Error::shape(op, format!("spec has {} spatial dims, expected {dims}", spec.spatial_dims())));
    }
    Ok(())
}

fn check_bias<T: Scalar>(spec: &ConvSpec, bias: Option<&RealTensor<T>>, op: &'static str) -> Result<()> {
    match (spec.bias, bias) {
        (true, Some(b)) => b.expect_shape(&[spec.out_channels], op),
        (true, None) => Err(Error::shape(op, "spec declares a bias but none was given")),
        (false, Some(_)) => Err(Error::shape(op, "bias given for a bias-free spec")),
        (false, None) => Ok(()),
    }
}

fn check_channels(actual: usize, spec: &ConvSpec, op: &'static str) -> Result<()> {
    if actual != spec.in_channels {
        return Err(Error::shape(
            op,
            format!("input channels: expected {}, got {actual}", spec.in_channels),
        ));
    }
    Ok(())
}

/// Output range `t0..t1` for which `t * stride + offset` lands inside `0..len`.
#[inline]
fn valid_range(offset: isize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let t0 = if offset < 0 { ((-offset) + s - 1) / s } else { 0 };
    let rem = len as isize - offset;
    let t1 = if rem > 0 { (rem + s - 1) / s } else { 0 };
    let t1 = (t1 as usize).min(out_len);
    (t0 as usize, t1.max(t0 as usize))
}

/// `acc[t] += w * x[t * stride + offset]` over the valid output range.
#[inline]
fn axpy_strided<T: Scalar>(acc: &mut [f64], w: f64, x: &[T], offset: isize, stride: usize) {
    let (t0, t1) = valid_range(offset, stride, x.len(), acc.len());
    if t0 >= t1 {
        return;
    }
    let start = (t0 as isize * stride as isize + offset) as usize;
    if stride == 1 {
        for (a, &v) in acc[t0..t1].iter_mut().zip(&x[start..start + (t1 - t0)]) {
            *a += w * v.to_acc();
        }
    } else {
        for (a, &v) in acc[t0..t1].iter_mut().zip(x[start..].iter().step_by(stride)) {
            *a += w * v.to_acc();
        }
    }
}

fn init_acc<T: Scalar>(bias: Option<&RealTensor<T>>, o: usize, n: usize) -> Vec<f64> {
    vec![bias.map_or(0.0, |b| b.data()[o].to_acc()); n]
}

/// 1D convolution of a `[C_in, L]` input.
pub fn conv1d<T: Scalar>(
    input: &RealTensor<T>,
    spec: &ConvSpec,
    weight: &RealTensor<T>,
    bias: Option<&RealTensor<T>>,
) -> Result<RealTensor<T>> {
    const OP: &str = "conv1d";
    check_rank(spec, 1, OP)?;
    input.expect_rank(2, OP)?;
    check_channels(input.shape()[0], spec, OP)?;
    weight.expect_shape(&spec.weight_shape(), OP)?;
    check_bias(spec, bias, OP)?;
    let len = input.shape()[1];
    let lout = spec.output_len(0, len).ok_or_else(|| {
        Error::shape(OP, format!("length {len} shorter than dilated kernel after padding"))
    })?;
    let (k, s, d, p) = (spec.kernel[0], spec.stride[0], spec.dilation[0], spec.padding[0] as isize);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;

    let mut out = vec![T::zero(); spec.out_channels * lout];
    let macs: u64 = out
        .par_chunks_mut(lout)
        .enumerate()
        .map(|(o, row)| {
            let g = o / cout_g;
            let mut acc = init_acc(bias, o, lout);
            let mut macs = 0u64;
            for ic in 0..cin_g {
                let x = input.outer(g * cin_g + ic);
                let taps = &weight.data()[(o * cin_g + ic) * k..][..k];
                for (j, &w) in taps.iter().enumerate() {
                    axpy_strided(&mut acc, w.to_acc(), x, (j * d) as isize - p, s);
                    macs += lout as u64;
                }
            }
            row.iter_mut().zip(&acc).for_each(|(r, &a)| *r = T::from_acc(a));
            macs
        })
        .sum();
    instrument::record(macs);
    Ok(RealTensor::from_parts_unchecked(vec![spec.out_channels, lout], out))
}

/// 2D convolution of a `[C_in, F, T]` input.
pub fn conv2d<T: Scalar>(
    input: &RealTensor<T>,
    spec: &ConvSpec,
    weight: &RealTensor<T>,
    bias: Option<&RealTensor<T>>,
) -> Result<RealTensor<T>> {
    const OP: &str = "conv2d";
    check_rank(spec, 2, OP)?;
    input.expect_rank(3, OP)?;
    check_channels(input.shape()[0], spec, OP)?;
    weight.expect_shape(&spec.weight_shape(), OP)?;
    check_bias(spec, bias, OP)?;
    let (fin, tin) = (input.shape()[1], input.shape()[2]);
    let fout = spec
        .output_len(0, fin)
        .ok_or_else(|| Error::shape(OP, format!("frequency extent {fin} shorter than kernel")))?;
    let tout = spec
        .output_len(1, tin)
        .ok_or_else(|| Error::shape(OP, format!("time extent {tin} shorter than kernel")))?;
    let (kf, kt) = (spec.kernel[0], spec.kernel[1]);
    let (sf, st) = (spec.stride[0], spec.stride[1]);
    let (df, dt) = (spec.dilation[0], spec.dilation[1]);
    let (pf, pt) = (spec.padding[0] as isize, spec.padding[1] as isize);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let plane = fout * tout;

    let mut out = vec![T::zero(); spec.out_channels * plane];
    let macs: u64 = out
        .par_chunks_mut(plane)
        .enumerate()
        .map(|(o, dst)| {
            let g = o / cout_g;
            let mut acc = init_acc(bias, o, plane);
            let mut macs = 0u64;
            for ic in 0..cin_g {
                let x = input.outer(g * cin_g + ic);
                let taps = &weight.data()[(o * cin_g + ic) * kf * kt..][..kf * kt];
                for jf in 0..kf {
                    for jt in 0..kt {
                        let w = taps[jf * kt + jt].to_acc();
                        let toff = (jt * dt) as isize - pt;
                        for fo in 0..fout {
                            let fi = (fo * sf) as isize + (jf * df) as isize - pf;
                            if fi < 0 || fi >= fin as isize {
                                continue;
                            }
                            let xrow = &x[fi as usize * tin..][..tin];
                            axpy_strided(&mut acc[fo * tout..][..tout], w, xrow, toff, st);
                        }
                        macs += plane as u64;
                    }
                }
            }
            dst.iter_mut().zip(&acc).for_each(|(r, &a)| *r = T::from_acc(a));
            macs
        })
        .sum();
    instrument::record(macs);
    Ok(RealTensor::from_parts_unchecked(vec![spec.out_channels, fout, tout], out))
}

/// 1D transposed convolution (the adjoint of [`conv1d`] with the same geometry).
pub fn conv_transpose1d<T: Scalar>(
    input: &RealTensor<T>,
    spec: &ConvSpec,
    weight: &RealTensor<T>,
    bias: Option<&RealTensor<T>>,
) -> Result<RealTensor<T>> {
    const OP: &str = "conv_transpose1d";
    check_rank(spec, 1, OP)?;
    input.expect_rank(2, OP)?;
    check_channels(input.shape()[0], spec, OP)?;
    weight.expect_shape(&spec.transposed_weight_shape(), OP)?;
    check_bias(spec, bias, OP)?;
    let len = input.shape()[1];
    let lout = spec
        .transposed_output_len(len)
        .ok_or_else(|| Error::shape(OP, format!("padding consumes the whole output for length {len}")))?;
    let (k, s, d, p) = (spec.kernel[0], spec.stride[0], spec.dilation[0], spec.padding[0] as isize);
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;

    let mut out = vec![T::zero(); spec.out_channels * lout];
    let macs: u64 = out
        .par_chunks_mut(lout)
        .enumerate()
        .map(|(o, row)| {
            let g = o / cout_g;
            let oc = o % cout_g;
            let mut acc = init_acc(bias, o, lout);
            let mut macs = 0u64;
            for ic in 0..cin_g {
                let c = g * cin_g + ic;
                let x = input.outer(c);
                let taps = &weight.data()[(c * cout_g + oc) * k..][..k];
                for (j, &w) in taps.iter().enumerate() {
                    let w = w.to_acc();
                    let off = (j * d) as isize - p;
                    for (t, &v) in x.iter().enumerate() {
                        let pos = (t * s) as isize + off;
                        if pos >= 0 && (pos as usize) < lout {
                            acc[pos as usize] += w * v.to_acc();
                        }
                    }
                    macs += len as u64;
                }
            }
            row.iter_mut().zip(&acc).for_each(|(r, &a)| *r = T::from_acc(a));
            macs
        })
        .sum();
    instrument::record(macs);
    Ok(RealTensor::from_parts_unchecked(vec![spec.out_channels, lout], out))
}

pub fn leaky_relu<T: Scalar>(x: &RealTensor<T>, slope: T) -> RealTensor<T> {
    x.map(|v| if v >= T::zero() { v } else { slope * v })
}

#[inline]
pub(crate) fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    let x = v.to_acc();
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    T::from_acc(y)
}

pub fn sigmoid<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    x.map(sigmoid_scalar)
}

pub fn tanh<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    x.map(|v| v.tanh())
}

/// `W x + b` for `x: [D]`, `W: [D_out, D]`, `b: [D_out]`.
pub fn affine<T: Scalar>(x: &RealTensor<T>, w: &RealTensor<T>, b: &RealTensor<T>) -> Result<RealTensor<T>> {
    x.expect_rank(1, "affine input")?;
    w.expect_rank(2, "affine weight")?;
    let (dout, d) = (w.shape()[0], w.shape()[1]);
    if d != x.len() {
        return Err(Error::shape("affine", format!("input dim: weight expects {d}, got {}", x.len())));
    }
    b.expect_shape(&[dout], "affine bias")?;
    let data = (0..dout)
        .map(|i| T::from_acc(crate::tensor::dot(w.outer(i), x.data()) + b.data()[i].to_acc()))
        .collect();
    instrument::record((dout * d) as u64);
    Ok(RealTensor::from_parts_unchecked(vec![dout], data))
}
