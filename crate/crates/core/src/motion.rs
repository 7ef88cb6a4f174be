//! Ego-motion direction from optical flow.
//!
//! The forward/backward reading of a flow field is its net expansion over a
//! rectangle `D`: the outward flux of the field through the boundary of `D`,
//! which by Green's theorem equals the integrated divergence but needs no
//! derivatives of the (noisy) flow. Integrating the per-pair measure over
//! time yields a "distance travelled" curve whose global maximum is the
//! estimated intubation/withdrawal boundary.

use rayon::prelude::*;
use thiserror::Error;

use crate::dataio::VectorField;
use crate::scalar::{Additive, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("region {region:?} does not fit a {width}x{height} field with a 1 px margin")]
    RegionOutOfBounds {
        region: Region,
        width: usize,
        height: usize,
    },
    #[error("region {0:?} is smaller than 8x8")]
    RegionTooSmall(Region),
    #[error("invalid motion parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, MotionError>;

/// Axis-aligned rectangle with corners on pixel centers, `x0 < x1`, `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        let r = Self { x0, y0, x1, y1 };
        if x1 < x0 + 8 || y1 < y0 + 8 {
            return Err(MotionError::RegionTooSmall(r));
        }
        Ok(r)
    }

    /// Centered rectangle spanning `fraction` of each dimension, pulled in to
    /// keep a 1 px margin for the central-difference stencil.
    pub fn centered(width: usize, height: usize, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(MotionError::InvalidParams(format!(
                "region fraction {fraction} outside (0, 1]"
            )));
        }
        let span = |n: usize| -> (usize, usize) {
            let c = (n as f64 - 1.0) / 2.0;
            let h = fraction * (n as f64 - 1.0) / 2.0;
            let lo = ((c - h).round() as isize).max(1) as usize;
            let hi = ((c + h).round() as usize).min(n.saturating_sub(2));
            (lo, hi)
        };
        let (x0, x1) = span(width);
        let (y0, y1) = span(height);
        let r = Self::new(x0, y0, x1, y1)?;
        r.check(width, height)?;
        Ok(r)
    }

    pub fn area(&self) -> f64 {
        ((self.x1 - self.x0) * (self.y1 - self.y0)) as f64
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        if self.x1 < self.x0 + 8 || self.y1 < self.y0 + 8 {
            return Err(MotionError::RegionTooSmall(*self));
        }
        if self.x0 < 1 || self.y0 < 1 || self.x1 + 2 > width || self.y1 + 2 > height {
            return Err(MotionError::RegionOutOfBounds {
                region: *self,
                width,
                height,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionParams {
    /// Fraction of each image dimension covered by the centered region.
    pub region_fraction: f64,
    /// Odd temporal median filter width over the per-pair series; 1 disables it.
    pub median_width: usize,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            region_fraction: 0.8,
            median_width: 1,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_fraction > 0.0 && self.region_fraction <= 1.0) {
            return Err(MotionError::InvalidParams(format!(
                "region fraction {} outside (0, 1]",
                self.region_fraction
            )));
        }
        if self.median_width == 0 || self.median_width % 2 == 0 {
            return Err(MotionError::InvalidParams(format!(
                "median width {} must be odd",
                self.median_width
            )));
        }
        Ok(())
    }
}

/// Trapezoid sum of `f(k)` for `k` in `lo..=hi` with unit spacing.
fn trapezoid(lo: usize, hi: usize, f: impl Fn(usize) -> f64) -> f64 {
    let inner: f64 = (lo + 1..hi).map(&f).sum();
    inner + 0.5 * (f(lo) + f(hi))
}

/// Outward flux `∮ F·n ds` through the boundary of `region`, in px²/frame.
///
/// Each edge is integrated with the trapezoid rule on pixel centers. Opposite
/// edges are differenced sample by sample, so a constant field cancels exactly.
pub fn boundary_flux<T: Scalar>(field: &VectorField<T>, region: &Region) -> Result<f64> {
    region.check(field.width, field.height)?;
    let Region { x0, y0, x1, y1 } = *region;
    let w = field.width;
    let u = |x: usize, y: usize| field.u[y * w + x].f64();
    let v = |x: usize, y: usize| field.v[y * w + x].f64();
    let vertical = trapezoid(y0, y1, |y| u(x1, y) - u(x0, y));
    let horizontal = trapezoid(x0, x1, |x| v(x, y1) - v(x, y0));
    Ok(vertical + horizontal)
}

/// Central-difference divergence integrated over `region` with trapezoid
/// weights. Independent of [`boundary_flux`]; the two agree by Green's theorem.
pub fn divergence_sum<T: Scalar>(field: &VectorField<T>, region: &Region) -> Result<f64> {
    region.check(field.width, field.height)?;
    let Region { x0, y0, x1, y1 } = *region;
    let w = field.width;
    let u = |x: usize, y: usize| field.u[y * w + x].f64();
    let v = |x: usize, y: usize| field.v[y * w + x].f64();
    let div = |x: usize, y: usize| {
        0.5 * (u(x + 1, y) - u(x - 1, y)) + 0.5 * (v(x, y + 1) - v(x, y - 1))
    };
    Ok(trapezoid(y0, y1, |y| trapezoid(x0, x1, |x| div(x, y))))
}

/// Area-normalized boundary flux: mean divergence over the region.
/// Positive means expansion (forward motion), negative contraction.
pub fn direction_measure<T: Scalar>(field: &VectorField<T>, params: &MotionParams) -> Result<f64> {
    let region = Region::centered(field.width, field.height, params.region_fraction)?;
    Ok(boundary_flux(field, &region)? / region.area())
}

/// Per-pair direction measures for a flow sequence, optionally median filtered.
pub fn direction_series<T: Scalar>(fields: &[VectorField<T>], params: &MotionParams) -> Result<Vec<f64>> {
    params.validate()?;
    let raw = fields
        .par_iter()
        .map(|f| direction_measure(f, params))
        .collect::<Result<Vec<f64>>>()?;
    Ok(median_filter(&raw, params.median_width))
}

/// Sliding median with a window truncated at the sequence ends.
pub fn median_filter(d: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return d.to_vec();
    }
    let half = width / 2;
    let mut buf = Vec::with_capacity(width);
    (0..d.len())
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&d[i.saturating_sub(half)..(i + half + 1).min(d.len())]);
            buf.sort_by(f64::total_cmp);
            let n = buf.len();
            if n % 2 == 1 {
                buf[n / 2]
            } else {
                0.5 * (buf[n / 2 - 1] + buf[n / 2])
            }
        })
        .collect()
}

/// Prefix sums `S(t) = Σ_{τ<t} d_τ`, length `N + 1`, `S(0) = 0`.
pub fn cumulative_signal<T: Additive>(d: &[T]) -> Vec<T> {
    let mut s = Vec::with_capacity(d.len() + 1);
    let mut acc = T::zero();
    s.push(acc);
    for &x in d {
        acc = acc + x;
        s.push(acc);
    }
    s
}

/// Index of the global maximum of `s`, earliest on ties. This is the first
/// frame of the withdrawal phase.
pub fn boundary_estimate<T: PartialOrd>(s: &[T]) -> usize {
    let mut best = 0;
    for (t, x) in s.iter().enumerate().skip(1) {
        if *x > s[best] {
            best = t;
        }
    }
    best
}

/// Phase 1 (intubation) for frames before `boundary`, phase 2 from it onward.
/// `boundary` is clamped to `total_frames`.
pub fn weak_labels(total_frames: usize, boundary: usize) -> Vec<u8> {
    let b = boundary.min(total_frames);
    let mut labels = vec![1u8; b];
    labels.resize(total_frames, 2);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(w: usize, h: usize, s: f64, cx: f64, cy: f64) -> VectorField<f64> {
        VectorField::from_fn(w, h, |x, y| (s * (x - cx), s * (y - cy)))
    }

    #[test]
    fn unit_radial_flux_is_twice_the_area() {
        let r = Region::new(10, 10, 42, 42).unwrap();
        let f = radial(64, 64, 1.0, 26.0, 26.0);
        let l = 32.0;
        assert!((boundary_flux(&f, &r).unwrap() - 2.0 * l * l).abs() < 1e-9);
        assert!((divergence_sum(&f, &r).unwrap() - 2.0 * l * l).abs() < 1e-9);
    }

    #[test]
    fn translation_has_no_flux() {
        let f: VectorField<f32> = VectorField::from_fn(64, 64, |_, _| (5.0, 0.0));
        let r = Region::new(3, 3, 50, 60).unwrap();
        assert_eq!(boundary_flux(&f, &r).unwrap(), 0.0);
        assert_eq!(direction_measure(&f, &MotionParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_field_flux() {
        // F = (x², xy) over [0,2]², pixel i ↦ x = (i-1)·h.
        let n = 256;
        let h = 2.0 / 253.0;
        let f: VectorField<f64> = VectorField::from_fn(n, n, |i, j| {
            let (x, y) = ((i - 1.0) * h, (j - 1.0) * h);
            (x * x, x * y)
        });
        let r = Region::new(1, 1, 254, 254).unwrap();
        let flux = boundary_flux(&f, &r).unwrap() * h;
        let div = divergence_sum(&f, &r).unwrap() * h;
        assert!((flux - 12.0).abs() / 12.0 < 0.02, "flux {flux}");
        assert!((div - flux).abs() / flux.abs() < 0.02, "div {div} flux {flux}");
    }

    #[test]
    fn direction_measure_signs() {
        let p = MotionParams::default();
        let f = radial(64, 64, 1.0, 31.5, 31.5);
        assert!((direction_measure(&f, &p).unwrap() - 2.0).abs() < 1e-12);
        let neg = radial(64, 64, -1.0, 31.5, 31.5);
        assert!((direction_measure(&neg, &p).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn region_errors() {
        let f: VectorField<f32> = VectorField::zeros(32, 32);
        let r = Region::new(0, 1, 20, 20).unwrap();
        assert!(matches!(boundary_flux(&f, &r), Err(MotionError::RegionOutOfBounds { .. })));
        let r = Region::new(1, 1, 31, 20).unwrap();
        assert!(matches!(divergence_sum(&f, &r), Err(MotionError::RegionOutOfBounds { .. })));
        assert!(Region::new(1, 1, 5, 20).is_err());
        assert!(Region::centered(32, 32, 0.0).is_err());
        assert!(Region::centered(8, 8, 0.8).is_err());
    }

    #[test]
    fn cumulative_and_boundary() {
        assert_eq!(cumulative_signal(&[1.0, 1.0, -1.0]), vec![0.0, 1.0, 2.0, 1.0]);
        assert_eq!(cumulative_signal(&[0.0; 4]), vec![0.0; 5]);
        assert_eq!(boundary_estimate(&[0.0, 1.0, 2.0, 1.0]), 2);
        assert_eq!(boundary_estimate(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn labels() {
        assert_eq!(weak_labels(5, 2), vec![1, 1, 2, 2, 2]);
        assert_eq!(weak_labels(5, 0), vec![2; 5]);
        assert_eq!(weak_labels(5, 5), vec![1; 5]);
    }

    #[test]
    fn median_filter_removes_spikes() {
        let d = [1.0, 1.0, 50.0, 1.0, 1.0];
        assert_eq!(median_filter(&d, 3), vec![1.0; 5]);
        assert_eq!(median_filter(&d, 1), d.to_vec());
        assert!(MotionParams { median_width: 2, ..Default::default() }.validate().is_err());
    }
}
