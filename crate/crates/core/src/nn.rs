//! Pieces shared by the two networks: seeded initialization, the model
//! directory format and numerically safe softmax.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataio::{load_tensor, store_tensor, DataIoError, TensorFile};
use crate::scalar::{cast_slice, Scalar};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Data(#[from] DataIoError),
    #[error("manifest {path}: {msg}")]
    Manifest { path: String, msg: String },
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

/// `n` values uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<T: Scalar>(fan_in: usize, fan_out: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-a..=a))).collect()
}

/// Two-class softmax of logits, computed in 64 bits.
pub fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let (e0, e1) = ((z0 - m).exp(), (z1 - m).exp());
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Dot product with 64-bit accumulation.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.f64() * y.f64()).sum()
}

/// Named parameter tensor of a model.
pub struct Param<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [T],
}

/// Writes `manifest.txt` (the header lines, then one `param <name> <dims..>`
/// line per tensor) and `<name>.ptns` for every parameter.
pub fn write_model_dir<T: Scalar>(dir: &Path, header: &[String], params: &[Param<'_, T>]) -> Result<(), ModelIoError> {
    fs::create_dir_all(dir).map_err(|e| DataIoError::io(dir, e))?;
    let mut manifest = header.join("\n");
    manifest.push('\n');
    for p in params {
        let dims: Vec<String> = p.dims.iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("param {} {}\n", p.name, dims.join(" ")));
        let t = TensorFile::new(p.dims.clone(), cast_slice(p.data))?;
        store_tensor(&t, dir.join(format!("{}.ptns", p.name)))?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| DataIoError::io(&path, e))?;
    Ok(())
}

/// Parsed manifest: `key -> values` for header lines, plus the parameter list.
pub struct Manifest {
    pub path: String,
    pub fields: BTreeMap<String, Vec<String>>,
    pub params: Vec<(String, Vec<usize>)>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, ModelIoError> {
        let path = dir.join("manifest.txt");
        let text = fs::read_to_string(&path).map_err(|e| DataIoError::io(&path, e))?;
        let mut m = Manifest {
            path: path.display().to_string(),
            fields: BTreeMap::new(),
            params: Vec::new(),
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default().to_string();
            let rest: Vec<String> = it.map(String::from).collect();
            if key == "param" {
                let name = rest.first().cloned().ok_or_else(|| m.err("param line without name"))?;
                let dims = rest[1..]
                    .iter()
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| m.err(&format!("bad dims for {name}")))?;
                m.params.push((name, dims));
            } else {
                m.fields.insert(key, rest);
            }
        }
        Ok(m)
    }

    pub fn err(&self, msg: &str) -> ModelIoError {
        ModelIoError::Manifest {
            path: self.path.clone(),
            msg: msg.to_string(),
        }
    }

    pub fn values(&self, key: &str) -> Result<&[String], ModelIoError> {
        self.fields
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| self.err(&format!("missing `{key}`")))
    }

    pub fn usizes(&self, key: &str) -> Result<Vec<usize>, ModelIoError> {
        self.values(key)?
            .iter()
            .map(|v| v.parse::<usize>().map_err(|_| self.err(&format!("`{key}`: not an integer: {v}"))))
            .collect()
    }

    pub fn usize(&self, key: &str) -> Result<usize, ModelIoError> {
        match self.usizes(key)?.as_slice() {
            [v] => Ok(*v),
            _ => Err(self.err(&format!("`{key}` needs one value"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ModelIoError> {
        match self.values(key)? {
            [v] => v.parse().map_err(|_| self.err(&format!("`{key}`: not a number: {v}"))),
            _ => Err(self.err(&format!("`{key}` needs one value"))),
        }
    }
}

/// Loads parameter `name` from `dir`, checking its shape.
pub fn load_param<T: Scalar>(dir: &Path, name: &str, dims: &[usize]) -> Result<Vec<T>, ModelIoError> {
    let t = load_tensor(dir.join(format!("{name}.ptns")))?;
    if t.dims != dims {
        return Err(ModelIoError::Shape {
            name: name.to_string(),
            expected: dims.to_vec(),
            found: t.dims,
        });
    }
    Ok(cast_slice(&t.data))
}

/// Relative error used by the gradient checks, with a floor on the scale so
/// vanishing gradients compare by absolute difference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}
