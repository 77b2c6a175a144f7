//! Named tensor storage and the per-layer declarations a model demands.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::ConvSpec;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

/// Canonical layer name -> dense tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore<T> {
    tensors: BTreeMap<String, RealTensor<T>>,
}

impl<T: Scalar> WeightStore<T> {
    pub fn new() -> Self {
        Self { tensors: BTreeMap::new() }
    }

    /// Inserts a tensor, returning the previous one under that name.
    pub fn insert(&mut self, name: impl Into<String>, tensor: RealTensor<T>) -> Option<RealTensor<T>> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn remove(&mut self, name: &str) -> Option<RealTensor<T>> {
        self.tensors.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&RealTensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut RealTensor<T>> {
        self.tensors.get_mut(name)
    }

    /// Lookup that fails with the missing name.
    pub fn require(&self, name: &str) -> Result<&RealTensor<T>> {
        self.tensors.get(name).ok_or_else(|| Error::Weights(vec![format!("missing tensor '{name}'")]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &RealTensor<T>)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar values held.
    pub fn element_count(&self) -> usize {
        self.tensors.values().map(RealTensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> WeightStore<U> {
        WeightStore { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }
}

impl<T: Scalar> FromIterator<(String, RealTensor<T>)> for WeightStore<T> {
    fn from_iter<I: IntoIterator<Item = (String, RealTensor<T>)>>(iter: I) -> Self {
        Self { tensors: iter.into_iter().collect() }
    }
}

/// What a named layer needs from the store.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv(ConvSpec),
    ConvTranspose(ConvSpec),
    /// Per-channel scalar affine of a feature-map scaling block.
    Scale { channels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDecl {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerDecl {
    pub fn conv(name: impl Into<String>, spec: ConvSpec) -> Self {
        Self { name: name.into(), kind: LayerKind::Conv(spec) }
    }

    pub fn conv_transpose(name: impl Into<String>, spec: ConvSpec) -> Self {
        Self { name: name.into(), kind: LayerKind::ConvTranspose(spec) }
    }

    pub fn scale(name: impl Into<String>, channels: usize) -> Self {
        Self { name: name.into(), kind: LayerKind::Scale { channels } }
    }

    /// `(tensor name, shape)` for every tensor this layer owns.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        let n = &self.name;
        match &self.kind {
            LayerKind::Conv(s) | LayerKind::ConvTranspose(s) => {
                let w = if matches!(self.kind, LayerKind::Conv(_)) { s.weight_shape() } else { s.transposed_weight_shape() };
                let mut v = vec![(format!("{n}.weight"), w)];
                if s.bias {
                    v.push((format!("{n}.bias"), vec![s.out_channels]));
                }
                v
            }
            LayerKind::Scale { channels } => {
                vec![(format!("{n}.w"), vec![*channels]), (format!("{n}.b"), vec![*channels])]
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.kind {
            LayerKind::Conv(s) | LayerKind::ConvTranspose(s) => s.param_count(),
            LayerKind::Scale { channels } => 2 * channels,
        }
    }
}

/// Every discrepancy between `store` and the tensors `layers` demand.
pub fn check_against(store: &WeightStore<impl Scalar>, layers: &[LayerDecl]) -> Vec<String> {
    let mut problems = Vec::new();
    for layer in layers {
        for (name, shape) in layer.tensors() {
            match store.get(&name) {
                None => problems.push(format!("missing tensor '{name}' (expected shape {shape:?})")),
                Some(t) if t.shape() != shape.as_slice() => problems.push(format!(
                    "tensor '{name}' has shape {:?}, expected {shape:?}",
                    t.shape()
                )),
                Some(t) if !t.all_finite() => problems.push(format!("tensor '{name}' has non-finite values")),
                Some(_) => {}
            }
        }
    }
    problems
}
