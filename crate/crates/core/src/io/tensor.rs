//! The VMT tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 0..4    magic "VMT1"
//! 4       version (1)
//! 5       dtype code (0 = float32)
//! 6       ndim (1..=4)
//! 7..     ndim x u32 extents
//! ..      product(extents) x f32, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"VMT1";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;
pub const MAX_NDIM: usize = 4;

/// Shape-tagged row-major `f32` array. Every instance has 1 to 4 positive
/// extents, a matching payload length and only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_NDIM {
            return Err(Error::Tensor(format!("ndim {} outside 1..=4", dims.len())));
        }
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Tensor(format!("zero extent on axis {axis}")));
        }
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Tensor("element count overflows usize".into()))?;
        if expected != data.len() {
            return Err(Error::Tensor(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Tensor(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
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

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.dims, self.data)
    }

    /// Serialize to the VMT byte layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            let d32 = u32::try_from(d).map_err(|_| FormatError::ExtentOverflow(d))?;
            out.extend_from_slice(&d32.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Parse and validate a VMT byte buffer.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < 7 {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(FormatError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(FormatError::Truncated {
                expected: 7,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        if bytes[4] != VERSION {
            return Err(FormatError::UnsupportedVersion(bytes[4]));
        }
        if bytes[5] != DTYPE_F32 {
            return Err(FormatError::UnsupportedDtype(bytes[5]));
        }
        let ndim = bytes[6];
        if ndim == 0 || ndim as usize > MAX_NDIM {
            return Err(FormatError::BadNdim(ndim));
        }
        let header_len = 7 + 4 * ndim as usize;
        if bytes.len() < header_len {
            return Err(FormatError::Truncated {
                expected: header_len,
                found: bytes.len(),
            });
        }
        let dims: Vec<usize> = bytes[7..header_len]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return Err(FormatError::ZeroExtent { axis });
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(header_len))
            .ok_or(FormatError::Truncated {
                expected: usize::MAX,
                found: bytes.len(),
            })?;
        if bytes.len() < count {
            return Err(FormatError::Truncated {
                expected: count,
                found: bytes.len(),
            });
        }
        if bytes.len() > count {
            return Err(FormatError::TrailingBytes(bytes.len() - count));
        }
        let mut data = Vec::with_capacity((count - header_len) / 4);
        for (i, c) in bytes[header_len..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(FormatError::NonFinite(i));
            }
            data.push(v);
        }
        Ok(Self { dims, data })
    }
}

pub fn write_tensor(t: &TensorF32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = t.to_bytes().map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorF32> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorF32::from_bytes(&bytes).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}
