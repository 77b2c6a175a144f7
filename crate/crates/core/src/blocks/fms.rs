//! Feature map scaling: a residual temporal attention.
//!
//! For a map `C[f, t]` the block pools over frequency, `a_t = mean_f C[f, t]`,
//! squashes an affine of the pooled value into a gate `S_t = sigmoid(w a_t + b)`
//! and returns `C[f, t] * S_t + C[f, t]`. Multi-channel inputs get one `(w, b)`
//! pair per channel and gates computed from that channel's own pooled values.

use crate::error::{Error, Result};
use crate::instrument;
use crate::kernels::sigmoid_scalar;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::WeightStore;

#[derive(Debug, Clone, PartialEq)]
pub struct FmsParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> FmsParams<T> {
    pub fn new(weight: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weight.len() != bias.len() || weight.is_empty() {
            return Err(Error::shape("fms params", format!("{} weights vs {} biases", weight.len(), bias.len())));
        }
        Ok(Self { weight, bias })
    }

    pub fn scalar(weight: T, bias: T) -> Self {
        Self { weight: vec![weight], bias: vec![bias] }
    }

    pub fn channels(&self) -> usize {
        self.weight.len()
    }

    pub(crate) fn from_store(store: &WeightStore<T>, name: &str) -> Result<Self> {
        let w = store.require(&format!("{name}.w"))?;
        let b = store.require(&format!("{name}.b"))?;
        Self::new(w.data().to_vec(), b.data().to_vec())
    }
}

/// Gate `S` for each channel and frame of a `[C, F, T]` map, flattened `[C * T]`.
pub fn scaling_coefficients<T: Scalar>(x: &RealTensor<T>, params: &FmsParams<T>) -> Result<Vec<T>> {
    x.expect_rank(3, "fms input")?;
    let (c, f, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if c != params.channels() {
        return Err(Error::shape("fms", format!("input channels: params cover {}, input has {c}", params.channels())));
    }
    let mut gates = vec![T::zero(); c * t];
    let mut pooled = vec![0.0f64; t];
    for ch in 0..c {
        pooled.iter_mut().for_each(|p| *p = 0.0);
        for row in x.outer(ch).chunks_exact(t) {
            for (p, &v) in pooled.iter_mut().zip(row) {
                *p += v.to_acc();
            }
        }
        let (w, b) = (params.weight[ch].to_acc(), params.bias[ch].to_acc());
        for (g, &p) in gates[ch * t..(ch + 1) * t].iter_mut().zip(&pooled) {
            *g = sigmoid_scalar(T::from_acc(w * (p / f as f64) + b));
        }
    }
    // one scalar affine per channel and frame
    instrument::record((c * t) as u64);
    Ok(gates)
}

/// FMS over a single `[F, T]` map or a `[C, F, T]` stack.
pub fn fms_forward<T: Scalar>(x: &RealTensor<T>, params: &FmsParams<T>) -> Result<RealTensor<T>> {
    let stacked = match x.rank() {
        2 => x.clone().reshape(&[1, x.shape()[0], x.shape()[1]])?,
        3 => x.clone(),
        _ => return Err(Error::shape("fms input", format!("expected [F, T] or [C, F, T], got {:?}", x.shape()))),
    };
    let gates = scaling_coefficients(&stacked, params)?;
    let t = *stacked.shape().last().unwrap();
    let mut out = stacked;
    for (ch, plane) in out.data_mut().chunks_exact_mut(x.len() / params.channels()).enumerate() {
        let g = &gates[ch * t..(ch + 1) * t];
        for row in plane.chunks_exact_mut(t) {
            for (v, &s) in row.iter_mut().zip(g) {
                *v = *v * s + *v;
            }
        }
    }
    out.reshape(x.shape())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_scale_by_one_and_a_half() {
        let c = RealTensor::<f32>::from_fn(&[5, 7], |i| (i as f32 * 0.37).sin());
        let y = fms_forward(&c, &FmsParams::scalar(0.0, 0.0)).unwrap();
        for (a, b) in c.data().iter().zip(y.data()) {
            assert_eq!(*b, 1.5 * a);
        }
    }

    #[test]
    fn saturated_gate_doubles() {
        let c = RealTensor::<f64>::from_fn(&[4, 3], |i| i as f64 - 5.0);
        let y = fms_forward(&c, &FmsParams::scalar(0.0, 40.0)).unwrap();
        for (a, b) in c.data().iter().zip(y.data()) {
            assert!((b - 2.0 * a).abs() <= 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let x = RealTensor::<f32>::zeros(&[2, 3, 4]);
        assert!(fms_forward(&x, &FmsParams::scalar(1.0, 0.0)).is_err());
        assert!(FmsParams::<f32>::new(vec![1.0], vec![]).is_err());
    }
}
