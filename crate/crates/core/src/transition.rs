//! Optimal two-phase partition of a per-frame probability series.
//!
//! For a split at `t` the partition score counts the phase-1 mass before `t`
//! and the phase-2 mass from `t` on:
//!
//! ```text
//! L(t) = Σ_{τ<t} p(τ,1) + Σ_{τ≥t} p(τ,2),   t ∈ [0, T]
//! ```
//!
//! and the transition is the earliest maximizer of `L`.

use thiserror::Error;

use crate::scalar::{Additive, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("empty probability series")]
    Empty,
    #[error("frame {frame}: probabilities {p:?} are not a distribution (tolerance 1e-3)")]
    NotNormalized { frame: usize, p: [f64; 2] },
    #[error("fps must be positive, got {0}")]
    BadFps(f64),
}

/// Per-frame two-class probabilities `[p(t,1), p(t,2)]` and the video frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProbs<T> {
    pub probs: Vec<[T; 2]>,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    /// First frame of phase 2.
    pub frame: usize,
    pub seconds: f64,
    pub score: T,
}

impl<T> PhaseProbs<T> {
    pub fn new(probs: Vec<[T; 2]>, fps: f64) -> Self {
        Self { probs, fps }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl<T: Scalar> PhaseProbs<T> {
    /// Checks ranges and per-frame sums; inputs are never renormalized.
    pub fn validate(&self) -> Result<(), TransitionError> {
        if !(self.fps > 0.0) {
            return Err(TransitionError::BadFps(self.fps));
        }
        for (frame, p) in self.probs.iter().enumerate() {
            let (a, b) = (p[0].f64(), p[1].f64());
            let in_range = (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b);
            if !in_range || ((a + b) - 1.0).abs() > 1e-3 {
                return Err(TransitionError::NotNormalized { frame, p: [a, b] });
            }
        }
        Ok(())
    }
}

/// `L(t)` evaluated directly from its definition.
pub fn partition_score<T: Additive>(probs: &[[T; 2]], t: usize) -> T {
    let t = t.min(probs.len());
    let head = probs[..t].iter().fold(T::zero(), |acc, p| acc + p[0]);
    let tail = probs[t..].iter().fold(T::zero(), |acc, p| acc + p[1]);
    head + tail
}

/// Earliest `argmax_t L(t)` in one pass using `L(t+1) = L(t) + p(t,1) − p(t,2)`.
pub fn detect_transition<T: Additive>(series: &PhaseProbs<T>) -> Result<Transition<T>, TransitionError> {
    let probs = &series.probs;
    if probs.is_empty() {
        return Err(TransitionError::Empty);
    }
    let mut score = probs.iter().fold(T::zero(), |acc, p| acc + p[1]);
    let (mut best_t, mut best) = (0, score);
    for (t, p) in probs.iter().enumerate() {
        score = score + p[0] - p[1];
        if score > best {
            best = score;
            best_t = t + 1;
        }
    }
    Ok(Transition {
        frame: best_t,
        seconds: best_t as f64 / series.fps,
        score: best,
    })
}
