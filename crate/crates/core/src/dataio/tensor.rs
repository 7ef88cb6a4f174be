use std::io::{Read, Write};
use std::path::Path;

use super::{read_file, write_file, DataIoError, Result};

const MAGIC: &[u8; 4] = b"PTNS";

/// Row-major `f32` tensor of rank 1 to 4.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(DataIoError::InvalidDims(format!(
                "tensor rank {} outside [1, 4]",
                dims.len()
            )));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(DataIoError::SizeMismatch {
                dims,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Rank-2 tensor from a list of equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(DataIoError::Invalid(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Interprets a rank-2 tensor as rows.
    pub fn rows(&self) -> Result<Vec<Vec<f32>>> {
        if self.rank() != 2 {
            return Err(DataIoError::InvalidDims(format!(
                "expected a rank-2 tensor, got dims {:?}",
                self.dims
            )));
        }
        let cols = self.dims[1];
        if cols == 0 {
            return Ok(vec![Vec::new(); self.dims[0]]);
        }
        Ok(self.data.chunks_exact(cols).map(<[f32]>::to_vec).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(DataIoError::BadMagic {
                expected: "PTNS",
                found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
            });
        }
        let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let rank = word(4) as usize;
        if rank == 0 || rank > 4 {
            return Err(DataIoError::InvalidDims(format!("tensor rank {rank} outside [1, 4]")));
        }
        let header = 8 + 4 * rank;
        if bytes.len() < header {
            return Err(DataIoError::Truncated {
                expected: header,
                actual: bytes.len(),
            });
        }
        let dims: Vec<usize> = (0..rank).map(|k| word(8 + 4 * k) as usize).collect();
        let expected: usize = dims.iter().product();
        let payload = &bytes[header..];
        if payload.len() != 4 * expected {
            return Err(DataIoError::SizeMismatch {
                dims,
                expected,
                actual: payload.len() / 4,
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }
}

pub fn read_tensor<R: Read>(mut reader: R) -> Result<TensorFile> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    TensorFile::from_bytes(&bytes)
}

pub fn write_tensor<W: Write>(t: &TensorFile, mut writer: W) -> Result<()> {
    writer.write_all(&t.to_bytes())?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    TensorFile::from_bytes(&read_file(path.as_ref())?)
}

pub fn store_tensor(t: &TensorFile, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &t.to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank1_file_is_24_bytes() {
        let t = TensorFile::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), 24);
        assert_eq!(TensorFile::from_bytes(&bytes).unwrap(), t);
    }

    #[test]
    fn declared_dims_must_match_payload() {
        let mut bytes = b"PTNS".to_vec();
        bytes.extend(2u32.to_le_bytes());
        bytes.extend(3u32.to_le_bytes());
        bytes.extend(3u32.to_le_bytes());
        for k in 0..8 {
            bytes.extend((k as f32).to_le_bytes());
        }
        assert!(matches!(
            TensorFile::from_bytes(&bytes),
            Err(DataIoError::SizeMismatch { expected: 9, actual: 8, .. })
        ));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            TensorFile::from_bytes(b"NPY\0\x01\0\0\0"),
            Err(DataIoError::BadMagic { .. })
        ));
        assert!(TensorFile::new(vec![], vec![]).is_err());
        assert!(TensorFile::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
    }
}
