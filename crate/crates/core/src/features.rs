//! Hand-crafted per-frame appearance descriptor.
//!
//! The dimensions target what separates the two phases visually: overall
//! exposure, how much dark lumen is visible, wall contact (flat, bright,
//! low-texture frames) and how much the view changes between frames.

use rayon::prelude::*;

use crate::dataio::FrameImage;

pub const FEATURE_DIM: usize = 26;
pub const HIST_BINS: usize = 16;

/// Feature indices after the histogram.
pub mod dim {
    pub const MEAN: usize = 16;
    pub const STD: usize = 17;
    pub const DARK_FRACTION: usize = 18;
    pub const BRIGHT_FRACTION: usize = 19;
    pub const GRADIENT_ENERGY: usize = 20;
    pub const CENTER_PERIPHERY_RATIO: usize = 21;
    pub const RADIAL_SLOPE: usize = 22;
    pub const FRAME_DIFF_ENERGY: usize = 23;
}

const DARK_LEVEL: u8 = 32;
const BRIGHT_LEVEL: u8 = 224;
const RATIO_EPS: f64 = 1e-3;

pub type FeatureVector = [f32; FEATURE_DIM];

/// Descriptor of `frame` (luma scaled to `[0, 1]`); `prev` supplies the
/// frame-difference dimension and must have the same size.
pub fn extract_features(frame: &FrameImage, prev: Option<&FrameImage>) -> FeatureVector {
    let (w, h) = (frame.width, frame.height);
    let luma = frame.luma_f32();
    let n = luma.len() as f64;
    let mut f = [0.0f32; FEATURE_DIM];

    let mut hist = [0usize; HIST_BINS];
    let (mut sum, mut sq, mut dark, mut bright) = (0.0f64, 0.0f64, 0usize, 0usize);
    for &v in &luma {
        let level = (v * 255.0).round() as u8;
        hist[(level as usize * HIST_BINS) / 256] += 1;
        dark += (level < DARK_LEVEL) as usize;
        bright += (level > BRIGHT_LEVEL) as usize;
        sum += v as f64;
        sq += (v as f64) * (v as f64);
    }
    for (k, &c) in hist.iter().enumerate() {
        f[k] = (c as f64 / n) as f32;
    }
    let mean = sum / n;
    f[dim::MEAN] = mean as f32;
    f[dim::STD] = (sq / n - mean * mean).max(0.0).sqrt() as f32;
    f[dim::DARK_FRACTION] = (dark as f64 / n) as f32;
    f[dim::BRIGHT_FRACTION] = (bright as f64 / n) as f32;

    let mut energy = 0.0f64;
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = 0.5 * (luma[y * w + xp] - luma[y * w + xm]) as f64;
            let gy = 0.5 * (luma[yp * w + x] - luma[ym * w + x]) as f64;
            energy += gx * gx + gy * gy;
        }
    }
    f[dim::GRADIENT_ENERGY] = (energy / n) as f32;

    // center disc of radius 0.25·side vs the rest; brightness-vs-radius slope
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r_max = (cx * cx + cy * cy).sqrt();
    let r_center = 0.25 * w.min(h) as f64;
    let (mut cs, mut cn, mut ps, mut pn) = (0.0, 0.0, 0.0, 0.0);
    let (mut sr, mut srr, mut srv) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let v = luma[y * w + x] as f64;
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if r < r_center {
                cs += v;
                cn += 1.0;
            } else {
                ps += v;
                pn += 1.0;
            }
            let rn = r / r_max;
            sr += rn;
            srr += rn * rn;
            srv += rn * v;
        }
    }
    let center = if cn > 0.0 { cs / cn } else { 0.0 };
    let periphery = if pn > 0.0 { ps / pn } else { 0.0 };
    f[dim::CENTER_PERIPHERY_RATIO] = ((center + RATIO_EPS) / (periphery + RATIO_EPS)) as f32;
    let var_r = srr / n - (sr / n).powi(2);
    f[dim::RADIAL_SLOPE] = if var_r > 0.0 {
        ((srv / n - (sr / n) * mean) / var_r) as f32
    } else {
        0.0
    };

    if let Some(p) = prev {
        if (p.width, p.height) == (w, h) {
            let pl = p.luma_f32();
            let d: f64 = luma.iter().zip(&pl).map(|(&a, &b)| ((a - b) as f64).powi(2)).sum();
            f[dim::FRAME_DIFF_ENERGY] = (d / n) as f32;
        }
    }
    f
}

/// Features for a whole sequence; frame `t` is differenced against `t − 1`.
pub fn extract_sequence(frames: &[FrameImage]) -> Vec<FeatureVector> {
    (0..frames.len())
        .into_par_iter()
        .map(|t| extract_features(&frames[t], t.checked_sub(1).map(|p| &frames[p])))
        .collect()
}

/// Per-dimension standardization fitted on a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and population std (two-pass), std floored at 1e-8.
pub fn fit_normalizer<V: AsRef<[f32]>>(rows: &[V]) -> Normalizer {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0f64; d];
    for r in rows {
        for (m, &x) in mean.iter_mut().zip(r.as_ref()) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; d];
    for r in rows {
        for ((v, &x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *v += (x as f64 - m).powi(2);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Normalizer { mean, std }
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f32]) -> Vec<f32> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (m, s))| ((x as f64 - m) / s) as f32)
            .collect()
    }
}

pub fn apply_normalizer(n: &Normalizer, row: &[f32]) -> Vec<f32> {
    n.apply(row)
}
