use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::FrameImage;

use super::flowgen::FoeWalk;
use super::{
    stream_rng, GroundTruth, MotionSchedule, PhaseAppearance, Result, SynthConfig, SynthError,
    STREAM_RENDER,
};

/// Angular texture cells around the tunnel.
const ANGULAR_CELLS: i64 = 32;
const LUMEN_LEVEL: f64 = 0.04;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iy: i64, salt: u64) -> f64 {
    let h = mix64(salt ^ mix64((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated lattice noise in `[0, 1]`, periodic in `y` with
/// period `period` cells.
fn value_noise(x: f64, y: f64, period: i64, salt: u64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (smooth(x - fx), smooth(y - fy));
    let (ix, iy) = (fx as i64, fy as i64);
    let wrap = |j: i64| j.rem_euclid(period);
    let (y0, y1) = (wrap(iy), wrap(iy + 1));
    let a = lattice(ix, y0, salt);
    let b = lattice(ix + 1, y0, salt);
    let c = lattice(ix, y1, salt);
    let d = lattice(ix + 1, y1, salt);
    let top = a + (b - a) * tx;
    let bot = c + (d - c) * tx;
    top + (bot - top) * ty
}

struct Ar1 {
    state: f64,
    corr: f64,
    sigma: f64,
}

impl Ar1 {
    fn new(corr: f64, sigma: f64) -> Self {
        Self { state: 0.0, corr, sigma }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.corr * self.state + (1.0 - self.corr * self.corr).sqrt() * self.sigma * z;
        self.state
    }
}

/// Streams the frames of one video, one at a time.
///
/// The camera sits in a tunnel whose wall texture is laid out in
/// `(ln r − position / zoom_radius, θ)` around the lumen, so an axial step of
/// `Δ` scales the image about the lumen center by `exp(Δ / zoom_radius)`.
pub struct FrameRenderer<'a> {
    config: &'a SynthConfig,
    schedule: &'a MotionSchedule,
    rng: ChaCha8Rng,
    salt: u64,
    frame: usize,
    position: f64,
    deformation: Ar1,
    brightness: Ar1,
    lumen: Ar1,
    foe: FoeWalk,
    contact_left: usize,
}

impl<'a> FrameRenderer<'a> {
    pub fn new(schedule: &'a MotionSchedule, config: &'a SynthConfig) -> Result<Self> {
        config.validate()?;
        if schedule.velocity.len() != config.total_frames {
            return Err(SynthError::LengthMismatch {
                schedule: schedule.velocity.len(),
                config: config.total_frames,
            });
        }
        let side = config.width.min(config.height) as f64;
        Ok(Self {
            config,
            schedule,
            rng: stream_rng(config.seed, STREAM_RENDER),
            salt: mix64(config.seed ^ 0x5eed_7e47),
            frame: 0,
            position: 0.0,
            deformation: Ar1::new(config.motion_noise_corr, config.motion_noise_sigma),
            brightness: Ar1::new(0.9, config.brightness_jitter),
            lumen: Ar1::new(0.9, config.lumen_jitter),
            foe: FoeWalk::new(config.foe_jitter, side / 8.0),
            contact_left: 0,
        })
    }

    fn look(&self) -> &'a PhaseAppearance {
        if self.frame < self.schedule.transition_frame {
            &self.config.intubation_look
        } else {
            &self.config.withdrawal_look
        }
    }

    fn render_contact(&mut self) -> Vec<f64> {
        let (w, h) = (self.config.width, self.config.height);
        let salt = self.salt ^ mix64(self.frame as u64 + 1);
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let n = value_noise(x as f64 / 24.0, y as f64 / 24.0, i64::MAX, salt);
                out.push(0.82 + 0.08 * n);
            }
        }
        out
    }

    fn render_tunnel(&mut self, look: &PhaseAppearance, gain: f64, lumen_scale: f64) -> Vec<f64> {
        let cfg = self.config;
        let (w, h) = (cfg.width, cfg.height);
        let side = w.min(h) as f64;
        let cx = (w as f64 - 1.0) / 2.0 + self.foe.offset[0];
        let cy = (h as f64 - 1.0) / 2.0 + self.foe.offset[1];
        let r_lumen = look.lumen_radius * side * lumen_scale;
        let r_far = 0.75 * side;
        let shift = self.position / cfg.zoom_radius;
        let cells = ANGULAR_CELLS as f64;
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let r = (dx * dx + dy * dy).sqrt().max(1e-3);
                let xi = (r.ln() - shift) * look.texture_scale;
                let a = (dy.atan2(dx) / std::f64::consts::TAU + 0.5) * cells;
                let tex = 0.65 * value_noise(xi, a, ANGULAR_CELLS, self.salt)
                    + 0.35 * value_noise(2.0 * xi + 17.0, 2.0 * a, 2 * ANGULAR_CELLS, !self.salt);
                let shade = (r / r_far).min(1.0).powf(0.35);
                let wall = gain * (0.45 + 0.55 * tex) * shade;
                let m = ((r - r_lumen) / 1.5).clamp(0.0, 1.0);
                let m = smooth(m);
                out.push(LUMEN_LEVEL + m * (wall - LUMEN_LEVEL));
            }
        }
        out
    }

    fn quantize(&mut self, img: Vec<f64>) -> FrameImage {
        let sigma = self.config.sensor_noise;
        let data = img
            .into_iter()
            .map(|v| {
                let z: f64 = if sigma > 0.0 { StandardNormal.sample(&mut self.rng) } else { 0.0 };
                (v * 255.0 + sigma * z).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        FrameImage::gray(self.config.width, self.config.height, data).expect("validated dims")
    }

    /// Renders the next frame, or `None` after the last one.
    pub fn next_frame(&mut self) -> Option<FrameImage> {
        if self.frame >= self.config.total_frames {
            return None;
        }
        let look = self.look();
        let b = self.brightness.step(&mut self.rng);
        let l = self.lumen.step(&mut self.rng);
        if self.contact_left == 0 && self.rng.random::<f64>() < look.wall_contact_prob {
            self.contact_left = self.rng.random_range(2..=6);
        }
        let img = if self.contact_left > 0 {
            self.contact_left -= 1;
            self.render_contact()
        } else {
            let gain = look.brightness * (1.0 + b) / 0.6;
            self.render_tunnel(look, gain, (1.0 + l).max(0.2))
        };
        let frame = self.quantize(img);

        let e = self.deformation.step(&mut self.rng);
        self.position += self.schedule.velocity[self.frame] + e;
        self.foe.advance(&mut self.rng);
        self.frame += 1;
        Some(frame)
    }
}

impl Iterator for FrameRenderer<'_> {
    type Item = FrameImage;

    fn next(&mut self) -> Option<FrameImage> {
        self.next_frame()
    }
}

/// Renders every frame of a video.
pub fn render_frames(schedule: &MotionSchedule, config: &SynthConfig) -> Result<(Vec<FrameImage>, GroundTruth)> {
    let frames: Vec<FrameImage> = FrameRenderer::new(schedule, config)?.collect();
    Ok((frames, schedule.ground_truth()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::make_schedule;

    fn small() -> SynthConfig {
        SynthConfig { total_frames: 120, ..Default::default() }
    }

    #[test]
    fn deterministic_and_sized() {
        let c = small();
        let (s, _) = make_schedule(&c).unwrap();
        let (a, gt) = render_frames(&s, &c).unwrap();
        let (b, _) = render_frames(&s, &c).unwrap();
        assert_eq!(a.len(), 120);
        assert_eq!(gt.total_frames(), 120);
        assert_eq!(a, b);
        let c2 = SynthConfig { seed: 1, ..small() };
        let (s2, _) = make_schedule(&c2).unwrap();
        assert_ne!(render_frames(&s2, &c2).unwrap().0, a);
    }

    #[test]
    fn phase_two_is_brighter() {
        let c = SynthConfig { total_frames: 300, ..Default::default() };
        let (s, gt) = make_schedule(&c).unwrap();
        let (frames, _) = render_frames(&s, &c).unwrap();
        let mean = |f: &FrameImage| f.data.iter().map(|&v| v as f64).sum::<f64>() / f.data.len() as f64;
        let (mut m1, mut n1, mut m2, mut n2) = (0.0, 0, 0.0, 0);
        for (f, &p) in frames.iter().zip(&gt.phases) {
            if p == 1 {
                m1 += mean(f);
                n1 += 1;
            } else {
                m2 += mean(f);
                n2 += 1;
            }
        }
        assert!(m2 / n2 as f64 > m1 / n1 as f64);
    }

    #[test]
    fn value_noise_is_periodic_in_angle() {
        for k in 0..10 {
            let x = 0.37 * k as f64;
            assert_eq!(value_noise(x, 0.25, 8, 3), value_noise(x, 8.25, 8, 3));
        }
    }
}
