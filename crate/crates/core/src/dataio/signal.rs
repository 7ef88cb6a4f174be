use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{read_file, write_file, DataIoError, Result};

const HEADER: &str = "index,value";

/// Indexed real-valued series, e.g. per-pair motion measures or per-frame labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalSeries {
    pub indices: Vec<i64>,
    pub values: Vec<f64>,
}

impl SignalSeries {
    pub fn new(indices: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(DataIoError::Invalid(format!(
                "{} indices vs {} values",
                indices.len(),
                values.len()
            )));
        }
        for (k, w) in indices.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(DataIoError::NonMonotonicIndex {
                    line: k + 3,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        Ok(Self { indices, values })
    }

    /// Values indexed `0..n`.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            indices: (0..values.len() as i64).collect(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Display` for `f64` emits the shortest representation that parses back
    /// to the same bits, so the CSV roundtrip is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.len() + HEADER.len() + 1);
        out.push_str(HEADER);
        out.push('\n');
        for (i, v) in self.indices.iter().zip(&self.values) {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::parse_lines(BufReader::new(text.as_bytes()))
    }

    fn parse_lines<R: BufRead>(reader: R) -> Result<Self> {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut saw_header = false;
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            let lineno = k + 1;
            if !saw_header {
                if line.trim() != HEADER {
                    return Err(DataIoError::MalformedHeader(format!(
                        "expected `{HEADER}`, found {line:?}"
                    )));
                }
                saw_header = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let (Some(a), Some(b), None) = (cells.next(), cells.next(), cells.next()) else {
                return Err(DataIoError::NonNumeric {
                    line: lineno,
                    cell: line.to_string(),
                });
            };
            let index: i64 = a.trim().parse().map_err(|_| DataIoError::NonNumeric {
                line: lineno,
                cell: a.to_string(),
            })?;
            let value: f64 = b.trim().parse().map_err(|_| DataIoError::NonNumeric {
                line: lineno,
                cell: b.to_string(),
            })?;
            if let Some(&prev) = indices.last() {
                if index <= prev {
                    return Err(DataIoError::NonMonotonicIndex {
                        line: lineno,
                        prev,
                        next: index,
                    });
                }
            }
            indices.push(index);
            values.push(value);
        }
        Ok(Self { indices, values })
    }
}

pub fn read_signal<R: Read>(reader: R) -> Result<SignalSeries> {
    SignalSeries::parse_lines(BufReader::new(reader))
}

pub fn write_signal<W: Write>(s: &SignalSeries, mut writer: W) -> Result<()> {
    writer.write_all(s.to_csv().as_bytes())?;
    Ok(())
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<SignalSeries> {
    let bytes = read_file(path.as_ref())?;
    read_signal(&bytes[..])
}

pub fn store_signal(s: &SignalSeries, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), s.to_csv().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_body() {
        let s = SignalSeries::parse_csv("index,value\n0,1.5\n1,-2.0").unwrap();
        assert_eq!(s.indices, vec![0, 1]);
        assert_eq!(s.values, vec![1.5, -2.0]);
    }

    #[test]
    fn empty_body() {
        let s = SignalSeries::parse_csv("index,value\n").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(matches!(
            SignalSeries::parse_csv("index,value\n0,1\n0,2\n"),
            Err(DataIoError::NonMonotonicIndex { line: 3, prev: 0, next: 0 })
        ));
        assert!(matches!(
            SignalSeries::parse_csv("index,value\n0,abc\n"),
            Err(DataIoError::NonNumeric { line: 2, .. })
        ));
        assert!(matches!(
            SignalSeries::parse_csv("idx,val\n"),
            Err(DataIoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn exact_float_roundtrip() {
        let vals = vec![0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 0.0];
        let s = SignalSeries::from_values(vals.clone());
        let back = SignalSeries::parse_csv(&s.to_csv()).unwrap();
        assert_eq!(back.values, vals);
    }
}
