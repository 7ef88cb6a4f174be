//! Synthetic endoscopy-like videos with known phase schedules.
//!
//! A video is a camera moving along a textured tunnel: forward (positive
//! axial velocity) during phase 1, slowly backward during phase 2, with
//! jitter, pauses and slips. Two outputs are derived from one schedule:
//! rendered gray frames (tunnel texture in log-polar coordinates around a
//! dark lumen, so axial motion is a radial zoom) and, independently,
//! idealized radial flow fields with additive noise and outliers.

mod corpus;
mod flowgen;
mod render;
mod schedule;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use corpus::{load_truth, store_truth, video_seed, write_video};
pub use flowgen::synth_flow_fields;
pub use render::{render_frames, FrameRenderer};
pub use schedule::{make_schedule, GroundTruth, MotionSchedule};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("schedule has {schedule} frames but config expects {config}")]
    LengthMismatch { schedule: usize, config: usize },
    #[error(transparent)]
    Io(#[from] crate::dataio::DataIoError),
    #[error("malformed ground truth: {0}")]
    Truth(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Axial motion statistics for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMotion {
    /// Mean velocity in px/frame of radial displacement at the zoom radius.
    pub velocity_mean: f64,
    pub velocity_jitter: f64,
    /// Per-frame probability of starting a standstill episode.
    pub pause_prob: f64,
    /// Per-frame probability of starting an episode against the phase direction.
    pub slip_prob: f64,
}

/// Rendering statistics for one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAppearance {
    /// Mean wall brightness in `[0, 1]`.
    pub brightness: f64,
    /// Lumen radius as a fraction of the smaller frame side.
    pub lumen_radius: f64,
    /// Texture cells per unit of log-radius.
    pub texture_scale: f64,
    /// Per-frame probability of starting a wall-contact episode.
    pub wall_contact_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub total_frames: usize,
    /// Transition frame as a fraction of `total_frames`, in `(0, 1)`.
    pub transition_fraction: f64,
    pub intubation: PhaseMotion,
    pub withdrawal: PhaseMotion,
    pub intubation_look: PhaseAppearance,
    pub withdrawal_look: PhaseAppearance,
    /// Radius (px) at which a unit velocity displaces the image by 1 px;
    /// the flow scale is `velocity / zoom_radius`.
    pub zoom_radius: f64,
    /// Per-frame random-walk step (px) of the focus of expansion.
    pub foe_jitter: f64,
    /// Additive Gaussian noise on generated flow vectors (px).
    pub flow_noise_sigma: f64,
    /// Fraction of generated flow vectors replaced by uniform outliers.
    pub outlier_fraction: f64,
    /// Apparent axial motion not caused by the camera (tissue deformation),
    /// AR(1) with this marginal std in velocity units. Affects rendering only.
    pub motion_noise_sigma: f64,
    pub motion_noise_corr: f64,
    /// Per-frame brightness jitter (relative std, AR(1) with corr 0.9).
    pub brightness_jitter: f64,
    /// Per-frame lumen radius jitter (relative std).
    pub lumen_jitter: f64,
    /// Gaussian sensor noise std in gray levels.
    pub sensor_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            total_frames: 1200,
            transition_fraction: 0.4,
            intubation: PhaseMotion {
                velocity_mean: 1.0,
                velocity_jitter: 0.4,
                pause_prob: 0.01,
                slip_prob: 0.01,
            },
            withdrawal: PhaseMotion {
                velocity_mean: -0.667,
                velocity_jitter: 0.25,
                pause_prob: 0.01,
                slip_prob: 0.005,
            },
            intubation_look: PhaseAppearance {
                brightness: 0.45,
                lumen_radius: 0.10,
                texture_scale: 6.0,
                wall_contact_prob: 0.05,
            },
            withdrawal_look: PhaseAppearance {
                brightness: 0.55,
                lumen_radius: 0.15,
                texture_scale: 6.0,
                wall_contact_prob: 0.01,
            },
            zoom_radius: 32.0,
            foe_jitter: 0.3,
            flow_noise_sigma: 0.5,
            outlier_fraction: 0.1,
            motion_noise_sigma: 1.2,
            motion_noise_corr: 0.9,
            brightness_jitter: 0.12,
            lumen_jitter: 0.25,
            sensor_noise: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn transition_frame(&self) -> usize {
        (self.transition_fraction * self.total_frames as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.transition_fraction > 0.0 && self.transition_fraction < 1.0) {
            return bad(format!(
                "transition fraction {} outside (0, 1)",
                self.transition_fraction
            ));
        }
        if self.total_frames < 100 {
            return bad(format!("total_frames {} < 100", self.total_frames));
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("frame {}x{} smaller than 16x16", self.width, self.height));
        }
        let t = self.transition_frame();
        if t == 0 || t >= self.total_frames {
            return bad(format!("transition frame {t} leaves an empty phase"));
        }
        let probs = [
            ("intubation.pause_prob", self.intubation.pause_prob),
            ("intubation.slip_prob", self.intubation.slip_prob),
            ("withdrawal.pause_prob", self.withdrawal.pause_prob),
            ("withdrawal.slip_prob", self.withdrawal.slip_prob),
            ("intubation_look.wall_contact_prob", self.intubation_look.wall_contact_prob),
            ("withdrawal_look.wall_contact_prob", self.withdrawal_look.wall_contact_prob),
            ("outlier_fraction", self.outlier_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.intubation.velocity_mean > 0.0) || !(self.withdrawal.velocity_mean < 0.0) {
            return bad("intubation mean velocity must be > 0 and withdrawal mean < 0".into());
        }
        if !(-1.0 < self.motion_noise_corr && self.motion_noise_corr < 1.0) {
            return bad(format!("motion_noise_corr {} outside (-1, 1)", self.motion_noise_corr));
        }
        let nonneg = [
            self.flow_noise_sigma,
            self.motion_noise_sigma,
            self.foe_jitter,
            self.brightness_jitter,
            self.lumen_jitter,
            self.sensor_noise,
            self.intubation.velocity_jitter,
            self.withdrawal.velocity_jitter,
        ];
        if nonneg.iter().any(|&x| !(x >= 0.0)) {
            return bad("noise and jitter levels must be non-negative".into());
        }
        if !(self.zoom_radius > 0.0) {
            return bad("zoom_radius must be positive".into());
        }
        Ok(())
    }
}

/// Independent deterministic stream `stream` derived from `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const STREAM_SCHEDULE: u64 = 1;
pub(crate) const STREAM_FLOW: u64 = 2;
pub(crate) const STREAM_RENDER: u64 = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let c = SynthConfig { transition_fraction: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = SynthConfig { transition_fraction: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = SynthConfig::default();
        c.withdrawal.pause_prob = 1.5;
        assert!(c.validate().is_err());
        let c = SynthConfig { total_frames: 50, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
