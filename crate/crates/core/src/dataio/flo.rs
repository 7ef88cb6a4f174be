use std::io::{Read, Write};
use std::path::Path;

use crate::scalar::Scalar;

use super::{read_file, write_file, DataIoError, Result};

/// Middlebury `.flo` tag: the bytes `PIEH` read as a little-endian `f32`.
pub const FLO_MAGIC: f32 = 202021.25;

/// Dense 2-D vector field sampled at pixel centers, row-major.
///
/// `u` is the horizontal (x) and `v` the vertical (y) component, both in
/// pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub width: usize,
    pub height: usize,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

/// Optical flow between two consecutive frames.
pub type FlowField = VectorField<f32>;

impl<T: Scalar> VectorField<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![T::zero(); width * height],
            v: vec![T::zero(); width * height],
        }
    }

    /// Samples `f(x, y) -> (u, v)` at integer pixel coordinates.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x as f64, y as f64);
                out.u[y * width + x] = T::of(u);
                out.v[y * width + x] = T::of(v);
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// Precision cast of both components.
    pub fn cast<U: Scalar>(&self) -> VectorField<U> {
        VectorField {
            width: self.width,
            height: self.height,
            u: crate::scalar::cast_slice(&self.u),
            v: crate::scalar::cast_slice(&self.v),
        }
    }

    /// `a·self + b·other` (same dimensions required).
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let comb = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&p, &q)| a * p + b * q).collect();
        Self {
            width: self.width,
            height: self.height,
            u: comb(&self.u, &other.u),
            v: comb(&self.v, &other.v),
        }
    }
}

impl FlowField {
    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.u.len());
        out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for (u, v) in self.u.iter().zip(&self.v) {
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_flo_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(DataIoError::Truncated {
                expected: 12,
                actual: bytes.len(),
            });
        }
        let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
        let magic = f32::from_le_bytes(word(0));
        if magic != FLO_MAGIC {
            return Err(DataIoError::WrongFlowMagic(magic));
        }
        let width = i32::from_le_bytes(word(4));
        let height = i32::from_le_bytes(word(8));
        if width <= 0 || height <= 0 {
            return Err(DataIoError::InvalidDims(format!(
                ".flo dims {width}x{height} must be positive"
            )));
        }
        let n = width as usize * height as usize;
        let expected = 12 + 8 * n;
        if bytes.len() < expected {
            return Err(DataIoError::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for k in 0..n {
            let off = 12 + 8 * k;
            u.push(f32::from_le_bytes(word(off)));
            v.push(f32::from_le_bytes(word(off + 4)));
        }
        Ok(Self {
            width: width as usize,
            height: height as usize,
            u,
            v,
        })
    }
}

pub fn read_flow<R: Read>(mut reader: R) -> Result<FlowField> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    FlowField::from_flo_bytes(&bytes)
}

pub fn write_flow<W: Write>(flow: &FlowField, mut writer: W) -> Result<()> {
    writer.write_all(&flow.to_flo_bytes())?;
    Ok(())
}

pub fn load_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    FlowField::from_flo_bytes(&read_file(path.as_ref())?)
}

pub fn store_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    if flow.u.len() != flow.width * flow.height || flow.v.len() != flow.u.len() {
        return Err(DataIoError::InvalidDims(
            "flow component length does not match width*height".into(),
        ));
    }
    write_file(path.as_ref(), &flow.to_flo_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_is_44_bytes() {
        let f = FlowField {
            width: 2,
            height: 2,
            u: vec![1.0; 4],
            v: vec![-1.0; 4],
        };
        let bytes = f.to_flo_bytes();
        assert_eq!(bytes.len(), 44);
        assert_eq!(&bytes[..4], b"PIEH");
        assert_eq!(FlowField::from_flo_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = FlowField::zeros(2, 2).to_flo_bytes();
        bytes[..4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(matches!(
            FlowField::from_flo_bytes(&bytes),
            Err(DataIoError::WrongFlowMagic(m)) if m == 0.0
        ));

        let mut bytes = FlowField::zeros(2, 2).to_flo_bytes();
        bytes[4..8].copy_from_slice(&0i32.to_le_bytes());
        assert!(matches!(
            FlowField::from_flo_bytes(&bytes),
            Err(DataIoError::InvalidDims(_))
        ));

        let bytes = FlowField::zeros(2, 2).to_flo_bytes();
        assert!(matches!(
            FlowField::from_flo_bytes(&bytes[..40]),
            Err(DataIoError::Truncated { expected: 44, actual: 40 })
        ));
    }
}
