//! HFSW weight container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HFSW"            4 bytes magic
//! version           u32 (= 1)
//! count             u32
//! count x {
//!     name_len      u32
//!     name          name_len bytes of UTF-8
//!     rank          u8
//!     dims          rank x u32
//!     dtype         u8 (0 = f32)
//!     data          prod(dims) x f32
//! }
//! ```
//!
//! The file must end right after the last tensor.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::RealTensor;
use crate::weights::WeightStore;

pub const MAGIC: &[u8; 4] = b"HFSW";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format {
            offset: self.pos,
            msg: format!("truncated while reading {what} ({n} bytes needed, {} left)", self.buf.len() - self.pos),
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Serializes every tensor as f32, in name order.
pub fn encode_weights<T: Scalar>(store: &WeightStore<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + store.element_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(DTYPE_F32);
        for &v in t.data() {
            out.extend_from_slice(&(v.to_acc() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<WeightStore<T>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format { offset: 0, msg: "bad magic, not an HFSW file".into() });
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = c.u32("tensor count")?;
    let mut seen = BTreeSet::new();
    let mut store = WeightStore::new();
    for _ in 0..count {
        let start = c.pos;
        let len = c.u32("name length")? as usize;
        let name = std::str::from_utf8(c.take(len, "name")?)
            .map_err(|_| Error::Format { offset: start + 4, msg: "tensor name is not UTF-8".into() })?
            .to_string();
        if !seen.insert(name.clone()) {
            return Err(Error::Format { offset: start, msg: format!("duplicate tensor name '{name}'") });
        }
        let rank = c.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(c.u32("dims")? as usize);
        }
        let tag_at = c.pos;
        let dtype = c.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format { offset: tag_at, msg: format!("unknown dtype tag {dtype} for '{name}'") });
        }
        let n: usize = dims.iter().product();
        let raw = c.take(n.checked_mul(4).unwrap_or(usize::MAX), &format!("data of '{name}'"))?;
        let data = raw.chunks_exact(4).map(|b| T::from_acc(f32::from_le_bytes(b.try_into().unwrap()) as f64)).collect();
        store.insert(name, RealTensor::new(dims, data)?);
    }
    if c.pos != bytes.len() {
        return Err(Error::Format { offset: c.pos, msg: format!("{} trailing bytes after last tensor", bytes.len() - c.pos) });
    }
    Ok(store)
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<WeightStore<T>> {
    decode_weights(&std::fs::read(path)?)
}

pub fn save_weights<T: Scalar>(path: impl AsRef<Path>, store: &WeightStore<T>) -> Result<()> {
    std::fs::write(path, encode_weights(store))?;
    Ok(())
}
