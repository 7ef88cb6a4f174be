use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{stream_rng, PhaseMotion, Result, SynthConfig, STREAM_SCHEDULE};

/// Per-frame axial velocity; `velocity[t]` moves the camera from frame `t` to `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSchedule {
    pub velocity: Vec<f64>,
    pub transition_frame: usize,
    pub total_frames: usize,
}

/// Phase labels are 1 (intubation) before `transition_frame`, 2 from it on.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub transition_frame: usize,
    pub phases: Vec<u8>,
    pub velocity: Vec<f64>,
}

impl GroundTruth {
    pub fn total_frames(&self) -> usize {
        self.phases.len()
    }
}

impl MotionSchedule {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            transition_frame: self.transition_frame,
            phases: crate::motion::weak_labels(self.total_frames, self.transition_frame),
            velocity: self.velocity.clone(),
        }
    }
}

const MAX_ATTEMPTS: usize = 10_000;

fn draw_segment<R: Rng>(rng: &mut R, n: usize, m: &PhaseMotion) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u: f64 = rng.random();
        if u < m.pause_prob {
            let len = rng.random_range(5..=30);
            out.extend(std::iter::repeat_n(0.0, len));
        } else if u < m.pause_prob + m.slip_prob {
            let len = rng.random_range(3..=15);
            for _ in 0..len {
                let z: f64 = StandardNormal.sample(rng);
                out.push(-0.6 * m.velocity_mean + 0.5 * m.velocity_jitter * z);
            }
        } else {
            let z: f64 = StandardNormal.sample(rng);
            out.push(m.velocity_mean + m.velocity_jitter * z);
        }
    }
    out.truncate(n);
    out
}

/// Every suffix of a forward segment must make net forward progress.
fn forward_ok(seg: &[f64]) -> bool {
    let mut acc = 0.0;
    seg.iter().rev().all(|&v| {
        acc += v;
        acc > 0.0
    })
}

/// Every prefix of a backward segment must make net backward progress.
fn backward_ok(seg: &[f64]) -> bool {
    let mut acc = 0.0;
    seg.iter().all(|&v| {
        acc += v;
        acc < 0.0
    })
}

fn segment<R: Rng>(rng: &mut R, n: usize, m: &PhaseMotion, ok: fn(&[f64]) -> bool) -> Vec<f64> {
    for _ in 0..MAX_ATTEMPTS {
        let seg = draw_segment(rng, n, m);
        if ok(&seg) {
            return seg;
        }
    }
    // Unreachable for sane configs: fall back to the constant mean.
    vec![m.velocity_mean; n]
}

/// Draws a velocity schedule whose prefix sums peak uniquely at the transition.
///
/// Each phase segment is resampled until the invariant holds, so the true
/// cumulative displacement is maximal exactly at the first withdrawal frame.
pub fn make_schedule(config: &SynthConfig) -> Result<(MotionSchedule, GroundTruth)> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, STREAM_SCHEDULE);
    let t = config.transition_frame();
    let n = config.total_frames;
    let mut velocity = segment(&mut rng, t, &config.intubation, forward_ok);
    velocity.extend(segment(&mut rng, n - t, &config.withdrawal, backward_ok));
    let schedule = MotionSchedule {
        velocity,
        transition_frame: t,
        total_frames: n,
    };
    let truth = schedule.ground_truth();
    Ok((schedule, truth))
}
