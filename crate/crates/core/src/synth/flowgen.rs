use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataio::FlowField;

use super::{stream_rng, MotionSchedule, Result, SynthConfig, SynthError, STREAM_FLOW};

/// Focus-of-expansion random walk, reflected to stay within `bound` of the center.
pub(crate) struct FoeWalk {
    pub(crate) offset: [f64; 2],
    step: f64,
    bound: f64,
}

impl FoeWalk {
    pub(crate) fn new(step: f64, bound: f64) -> Self {
        Self {
            offset: [0.0; 2],
            step,
            bound,
        }
    }

    pub(crate) fn advance<R: Rng>(&mut self, rng: &mut R) {
        for o in self.offset.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            let mut next = *o + self.step * z;
            if next > self.bound {
                next = 2.0 * self.bound - next;
            } else if next < -self.bound {
                next = -2.0 * self.bound - next;
            }
            *o = next.clamp(-self.bound, self.bound);
        }
    }
}

/// Radial flow fields `s·(p − FOE)` with `s = velocity / zoom_radius`, one per
/// consecutive frame pair, plus Gaussian noise and uniform outliers.
pub fn synth_flow_fields(schedule: &MotionSchedule, config: &SynthConfig) -> Result<Vec<FlowField>> {
    config.validate()?;
    if schedule.total_frames != config.total_frames || schedule.velocity.len() != config.total_frames {
        return Err(SynthError::LengthMismatch {
            schedule: schedule.velocity.len(),
            config: config.total_frames,
        });
    }
    let (w, h) = (config.width, config.height);
    let mut rng = stream_rng(config.seed, STREAM_FLOW);
    let noise = Normal::new(0.0, config.flow_noise_sigma)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let outlier_mag = w.min(h) as f64 / 4.0;
    let mut foe = FoeWalk::new(config.foe_jitter, w.min(h) as f64 / 8.0);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);

    let mut fields = Vec::with_capacity(config.total_frames - 1);
    for &vel in &schedule.velocity[..config.total_frames - 1] {
        let s = vel / config.zoom_radius;
        let (fx, fy) = (cx + foe.offset[0], cy + foe.offset[1]);
        let mut f = FlowField::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (mut u, mut v) = (s * (x as f64 - fx), s * (y as f64 - fy));
                if config.flow_noise_sigma > 0.0 {
                    u += noise.sample(&mut rng);
                    v += noise.sample(&mut rng);
                }
                if config.outlier_fraction > 0.0 && rng.random::<f64>() < config.outlier_fraction {
                    u = rng.random_range(-outlier_mag..=outlier_mag);
                    v = rng.random_range(-outlier_mag..=outlier_mag);
                }
                f.u[i] = u as f32;
                f.v[i] = v as f32;
            }
        }
        fields.push(f);
        foe.advance(&mut rng);
    }
    Ok(fields)
}
