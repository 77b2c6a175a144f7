use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major real tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> RealTensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor", format!("dimensions must be >= 1, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} holds {n} values but data has {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        assert!(!shape.is_empty() && shape.iter().all(|&d| d > 0), "bad shape {shape:?}");
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let mut t = Self::zeros(shape);
        t.data.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        t
    }

    /// One-dimensional tensor over `data`.
    pub fn vector(data: Vec<T>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise sum; shapes must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.expect_shape(other.shape(), "add")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn cast<U: Scalar>(&self) -> RealTensor<U> {
        RealTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::from_acc(v.to_acc())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of the leading axis as a flat slice.
    pub fn outer(&self, i: usize) -> &[T] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    /// Concatenates along the leading axis; trailing dims must agree.
    pub fn concat_outer(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("concat"))?;
        let inner = &first.shape[1..];
        let mut lead = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.shape[1..] != inner {
                return Err(Error::shape(
                    "concat",
                    format!("trailing dims {:?} vs {inner:?}", &p.shape[1..]),
                ));
            }
            lead += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = vec![lead];
        shape.extend_from_slice(inner);
        Self::new(shape, data)
    }

    pub(crate) fn expect_shape(&self, shape: &[usize], context: &'static str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(
                context,
                format!("expected {shape:?}, got {:?}", self.shape),
            ));
        }
        Ok(())
    }

    pub(crate) fn expect_rank(&self, rank: usize, context: &'static str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::shape(
                context,
                format!("expected rank {rank}, got shape {:?}", self.shape),
            ));
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }
}

/// Inner product accumulated in `f64`.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.to_acc() * y.to_acc()).sum()
}
