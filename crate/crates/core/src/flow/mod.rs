//! Dense optical flow by coarse-to-fine inverse search over patches.
//!
//! Each level of an image pyramid is covered by a grid of overlapping square
//! patches. A patch's translation is refined by inverse-compositional
//! Gauss–Newton (the Hessian is built once from the first frame's gradients),
//! initialized from the coarser level's dense field. Patch displacements are
//! then blended into a dense field, weighting each patch by how well it
//! matched. There is no variational refinement stage.

mod dis;
mod pyramid;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataio::{load_frame, DataIoError, FlowField, FrameImage};

pub use dis::{estimate_flow_pair, estimate_flow_pyramids, FlowStream};
pub use pyramid::{build_pyramid, build_pyramid_gray, Level, Pyramid};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frame {width}x{height} too small for {levels} levels of {patch}px patches")]
    FrameTooSmall {
        width: usize,
        height: usize,
        levels: usize,
        patch: usize,
    },
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error("need at least 2 frames, found {0}")]
    TooFewFrames(usize),
    #[error("missing frame {index} in {dir}")]
    MissingFrame { dir: PathBuf, index: usize },
    #[error(transparent)]
    Io(#[from] DataIoError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    /// Pyramid levels, each half the size of the next finer one.
    pub levels: usize,
    pub patch_size: usize,
    pub stride: usize,
    /// Gauss–Newton iterations per patch.
    pub iterations: usize,
    /// Stop iterating once the update norm drops below this (px).
    pub min_update: f32,
    /// Patch weight is `1 / (1 + mean squared residual / temperature)`.
    pub temperature: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 4,
            patch_size: 8,
            stride: 4,
            iterations: 8,
            min_update: 0.01,
            temperature: 0.01,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FlowError::InvalidParams(m.to_string()));
        if self.patch_size < 4 {
            return bad("patch size must be >= 4");
        }
        if self.stride == 0 || self.stride > self.patch_size {
            return bad("stride must be in [1, patch size]");
        }
        if self.levels == 0 {
            return bad("levels must be >= 1");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        Ok(())
    }

    /// Levels actually used for a `width`×`height` frame: the largest count
    /// not exceeding `levels` whose coarsest image is at least two patches wide.
    pub fn effective_levels(&self, width: usize, height: usize) -> usize {
        let side = width.min(height);
        let mut n = 1;
        while n < self.levels && (side >> n) >= 2 * self.patch_size {
            n += 1;
        }
        n
    }
}

fn frame_path(dir: &Path, index: usize) -> Option<PathBuf> {
    ["pgm", "ppm"]
        .iter()
        .map(|ext| dir.join(format!("frame_{index:06}.{ext}")))
        .find(|p| p.exists())
}

/// Number of consecutive `frame_%06d.{pgm,ppm}` files starting at index 0.
pub fn count_frames(dir: &Path) -> usize {
    (0..).take_while(|&i| frame_path(dir, i).is_some()).count()
}

/// Loads `frame_000000…` from `dir`; every file must share the first frame's size.
pub fn load_frame_dir(dir: &Path) -> Result<Vec<FrameImage>> {
    let n = count_frames(dir);
    let listed = std::fs::read_dir(dir)
        .map_err(|e| DataIoError::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("frame_"))
        .count();
    if listed > n {
        return Err(FlowError::MissingFrame {
            dir: dir.to_path_buf(),
            index: n,
        });
    }
    let frames = (0..n)
        .into_par_iter()
        .map(|i| Ok(load_frame(frame_path(dir, i).expect("counted"))?))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = frames.first() {
        for f in &frames[1..] {
            if (f.width, f.height) != (first.width, first.height) {
                return Err(FlowError::DimensionMismatch(first.width, first.height, f.width, f.height));
            }
        }
    }
    Ok(frames)
}

/// Flow for every consecutive pair; field `i` maps frame `i` onto `i + 1`.
/// Pairs are independent, so the result does not depend on the thread count.
pub fn estimate_flow_frames(frames: &[FrameImage], params: &FlowParams) -> Result<Vec<FlowField>> {
    if frames.len() < 2 {
        return Err(FlowError::TooFewFrames(frames.len()));
    }
    (0..frames.len() - 1)
        .into_par_iter()
        .map(|i| estimate_flow_pair(&frames[i], &frames[i + 1], params))
        .collect()
}

/// [`estimate_flow_frames`] over a directory of numbered frames.
pub fn estimate_flow_sequence(dir: &Path, params: &FlowParams) -> Result<Vec<FlowField>> {
    let frames = load_frame_dir(dir)?;
    estimate_flow_frames(&frames, params)
}
