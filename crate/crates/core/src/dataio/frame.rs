use std::io::{Read, Write};
use std::path::Path;

use super::{read_file, write_file, DataIoError, Result};

/// 8-bit gray or RGB frame, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

pub const MIN_FRAME_SIDE: usize = 8;

impl FrameImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(DataIoError::InvalidDims(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(DataIoError::InvalidDims(format!(
                "frame {width}x{height} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(DataIoError::Truncated {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    /// Luma samples in `[0, 1]` (RGB weighted 0.299/0.587/0.114).
    pub fn luma_f32(&self) -> Vec<f32> {
        match self.channels {
            1 => self.data.iter().map(|&v| v as f32 / 255.0).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|px| {
                    (0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32) / 255.0
                })
                .collect(),
        }
    }

    /// Canonical PNM serialization: `P5`/`P6`, single-space dims, LF separators.
    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pnm_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 {
            return Err(DataIoError::BadMagic {
                expected: "P5 or P6",
                found: String::from_utf8_lossy(bytes).into_owned(),
            });
        }
        let channels = match &bytes[..2] {
            b"P5" => 1,
            b"P6" => 3,
            other => {
                return Err(DataIoError::BadMagic {
                    expected: "P5 or P6",
                    found: String::from_utf8_lossy(other).into_owned(),
                })
            }
        };
        let mut pos = 2;
        let mut fields = [0u32; 3];
        for field in fields.iter_mut() {
            *field = next_header_number(bytes, &mut pos)?;
        }
        // exactly one whitespace byte separates maxval from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(DataIoError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ));
        }
        pos += 1;
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(DataIoError::UnsupportedMaxval(maxval));
        }
        let (width, height) = (width as usize, height as usize);
        let expected = width * height * channels;
        let payload = &bytes[pos..];
        if payload.len() < expected {
            return Err(DataIoError::Truncated {
                expected,
                actual: payload.len(),
            });
        }
        Self::new(width, height, channels, payload[..expected].to_vec())
    }
}

fn next_header_number(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    loop {
        match bytes.get(*pos) {
            None => return Err(DataIoError::MalformedHeader("header ends early".into())),
            Some(b'#') => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
        }
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(DataIoError::MalformedHeader(format!(
            "expected a decimal number at byte {start}"
        )));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| DataIoError::MalformedHeader("header number out of range".into()))
}

pub fn read_frame<R: Read>(mut reader: R) -> Result<FrameImage> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    FrameImage::from_pnm_bytes(&bytes)
}

pub fn write_frame<W: Write>(img: &FrameImage, mut writer: W) -> Result<()> {
    writer.write_all(&img.to_pnm_bytes())?;
    Ok(())
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<FrameImage> {
    FrameImage::from_pnm_bytes(&read_file(path.as_ref())?)
}

pub fn store_frame(img: &FrameImage, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &img.to_pnm_bytes())
}
