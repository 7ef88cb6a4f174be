use crate::dataio::FrameImage;

use super::{FlowError, FlowParams, Result};

/// One pyramid level: intensities in `[0, 1]` and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub width: usize,
    pub height: usize,
    pub image: Vec<f32>,
    pub grad_x: Vec<f32>,
    pub grad_y: Vec<f32>,
}

/// Levels ordered coarsest first; the last level is full resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<Level>,
}

impl Level {
    fn new(width: usize, height: usize, image: Vec<f32>) -> Self {
        let mut grad_x = vec![0.0; image.len()];
        let mut grad_y = vec![0.0; image.len()];
        for y in 0..height {
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(height - 1));
            for x in 0..width {
                let (xm, xp) = (x.saturating_sub(1), (x + 1).min(width - 1));
                grad_x[y * width + x] = 0.5 * (image[y * width + xp] - image[y * width + xm]);
                grad_y[y * width + x] = 0.5 * (image[yp * width + x] - image[ym * width + x]);
            }
        }
        Self {
            width,
            height,
            image,
            grad_x,
            grad_y,
        }
    }

    /// 2×2 box average; an odd trailing row/column averages what exists.
    fn downsample(&self) -> (usize, usize, Vec<f32>) {
        let (w, h) = (self.width.div_ceil(2), self.height.div_ceil(2));
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut n) = (0.0, 0.0);
                for sy in 2 * y..(2 * y + 2).min(self.height) {
                    for sx in 2 * x..(2 * x + 2).min(self.width) {
                        acc += self.image[sy * self.width + sx];
                        n += 1.0;
                    }
                }
                out.push(acc / n);
            }
        }
        (w, h, out)
    }

    /// Bilinear sample with border replication.
    #[inline]
    pub fn sample(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (ax, ay) = (x - x0 as f32, y - y0 as f32);
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.image[row0 + x0] + ax * (self.image[row0 + x1] - self.image[row0 + x0]);
        let bot = self.image[row1 + x0] + ax * (self.image[row1 + x1] - self.image[row1 + x0]);
        top + ay * (bot - top)
    }
}

/// Pyramid from gray samples in `[0, 1]`.
pub fn build_pyramid_gray(width: usize, height: usize, gray: Vec<f32>, params: &FlowParams) -> Result<Pyramid> {
    params.validate()?;
    let need = (1usize << (params.levels - 1)) * params.patch_size;
    if width < need || height < need {
        return Err(FlowError::FrameTooSmall {
            width,
            height,
            levels: params.levels,
            patch: params.patch_size,
        });
    }
    let mut levels = vec![Level::new(width, height, gray)];
    for _ in 1..params.levels {
        let (w, h, img) = levels.last().expect("non-empty").downsample();
        levels.push(Level::new(w, h, img));
    }
    levels.reverse();
    Ok(Pyramid { levels })
}

/// Pyramid of a frame's luma.
pub fn build_pyramid(frame: &FrameImage, params: &FlowParams) -> Result<Pyramid> {
    build_pyramid_gray(frame.width, frame.height, frame.luma_f32(), params)
}
