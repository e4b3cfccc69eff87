use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const QTNS_MAGIC: &[u8; 4] = b"QTNS";
pub const QTNS_VERSION: u32 = 1;

/// Dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::TensorFormat(format!("dims must be non-empty and positive, got {dims:?}")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::TensorFormat("element count overflows".into()))?;
        if len != data.len() {
            return Err(Error::TensorFormat(format!("dims {dims:?} need {len} values, got {}", data.len())));
        }
        Ok(TensorF32 { dims, data })
    }

    pub fn from_vec(data: Vec<f32>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Index of the first NaN or infinite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub(crate) fn with_data(&self, data: Vec<f32>) -> TensorF32 {
        debug_assert_eq!(data.len(), self.data.len());
        TensorF32 { dims: self.dims.clone(), data }
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// Encodes to the `QTNS` binary layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(QTNS_MAGIC);
        out.extend_from_slice(&QTNS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes a `QTNS` buffer. The buffer must hold exactly one tensor.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != QTNS_MAGIC {
            return Err(Error::TensorFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != QTNS_VERSION {
            return Err(Error::TensorFormat(format!("unsupported version {version}")));
        }
        let rank = r.u32()? as usize;
        if rank == 0 {
            return Err(Error::TensorFormat("rank must be at least 1".into()));
        }
        if rank.saturating_mul(8) > r.remaining() {
            return Err(Error::TensorFormat("truncated dims".into()));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64()?).map_err(|_| Error::TensorFormat("dim too large".into()))?;
            if d == 0 {
                return Err(Error::TensorFormat("zero dimension".into()));
            }
            count = count.checked_mul(d).ok_or_else(|| Error::TensorFormat("element count overflows".into()))?;
            dims.push(d);
        }
        let expected = count.checked_mul(4).ok_or_else(|| Error::TensorFormat("element count overflows".into()))?;
        if r.remaining() != expected {
            return Err(Error::TensorFormat(format!("payload is {} bytes, dims require {expected}", r.remaining())));
        }
        let data = r.take(expected)?.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(TensorF32 { dims, data })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::TensorFormat("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(b))
    }
}

pub fn read_tensor(path: &Path) -> Result<TensorF32> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorF32::from_bytes(&bytes).map_err(|e| match e {
        Error::TensorFormat(msg) => Error::TensorFormat(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_tensor(path: &Path, tensor: &TensorF32) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = TensorF32::new(vec![2, 1], vec![1.0, -2.5]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"QTNS");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..20], &2u64.to_le_bytes());
        assert_eq!(&b[28..32], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 12 + 16 + 8);
    }

    #[test]
    fn rejects_bad_magic_version_and_length() {
        let good = TensorF32::from_vec(vec![1.0, 2.0, 3.0]).unwrap().to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(TensorF32::from_bytes(&bad_magic).is_err());
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(TensorF32::from_bytes(&bad_version).is_err());
        assert!(TensorF32::from_bytes(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(TensorF32::from_bytes(&long).is_err());
    }

    #[test]
    fn rejects_overflowing_dims() {
        let mut b = Vec::new();
        b.extend_from_slice(b"QTNS");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&u64::MAX.to_le_bytes());
        b.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(TensorF32::from_bytes(&b).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(TensorF32::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(TensorF32::new(vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(data in proptest::collection::vec(any::<f32>(), 1..64)) {
            let t = TensorF32::from_vec(data).unwrap();
            let back = TensorF32::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(t.to_bytes(), back.to_bytes());
        }
    }
}
