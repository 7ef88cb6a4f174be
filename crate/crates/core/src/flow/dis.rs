use crate::dataio::{FlowField, FrameImage};

use super::pyramid::{build_pyramid, Level, Pyramid};
use super::{FlowError, FlowParams, Result};

/// Normal-matrix determinant below which a patch keeps its initialization.
const MIN_DETERMINANT: f32 = 1e-6;

fn bilinear(buf: &[f32], w: usize, h: usize, x: f32, y: f32) -> f32 {
    let x = x.clamp(0.0, (w - 1) as f32);
    let y = y.clamp(0.0, (h - 1) as f32);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (ax, ay) = (x - x0 as f32, y - y0 as f32);
    let top = buf[y0 * w + x0] + ax * (buf[y0 * w + x1] - buf[y0 * w + x0]);
    let bot = buf[y1 * w + x0] + ax * (buf[y1 * w + x1] - buf[y1 * w + x0]);
    top + ay * (bot - top)
}

/// Patch origins covering `0..n`, the last one flush with the border.
fn grid(n: usize, patch: usize, stride: usize) -> Vec<usize> {
    if n <= patch {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..=n - patch).step_by(stride).collect();
    if *out.last().expect("non-empty") + patch < n {
        out.push(n - patch);
    }
    out
}

/// Dense flow at one level, in that level's pixel units.
struct Dense {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl Dense {
    fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    /// Bilinear resampling onto a finer grid, displacements scaled to match.
    fn upscale(&self, width: usize, height: usize) -> Self {
        let (sx, sy) = (self.width as f32 / width as f32, self.height as f32 / height as f32);
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            let cy = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..width {
                let cx = (x as f32 + 0.5) * sx - 0.5;
                let i = y * width + x;
                out.u[i] = bilinear(&self.u, self.width, self.height, cx, cy) / sx;
                out.v[i] = bilinear(&self.v, self.width, self.height, cx, cy) / sy;
            }
        }
        out
    }
}

/// Samples the `p`×`p` patch at `(px, py)` of `level` displaced by `(u, v)`
/// into `out`. A translation shares one set of bilinear weights across the
/// patch, so interior patches skip per-pixel clamping.
fn warp_patch(level: &Level, px: usize, py: usize, p: usize, u: f32, v: f32, out: &mut Vec<f32>) {
    out.clear();
    let (fu, fv) = (u.floor(), v.floor());
    let (ax, ay) = (u - fu, v - fv);
    let (ox, oy) = (px as f32 + fu, py as f32 + fv);
    let w = level.width;
    let inside = ox >= 0.0 && oy >= 0.0 && ox + p as f32 <= (w - 1) as f32 && oy + p as f32 <= (level.height - 1) as f32;
    if !inside {
        for y in py..py + p {
            for x in px..px + p {
                out.push(level.sample(x as f32 + u, y as f32 + v));
            }
        }
        return;
    }
    let (ox, oy) = (ox as usize, oy as usize);
    let (w00, w10, w01, w11) = ((1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay);
    let img = &level.image;
    for y in 0..p {
        let r0 = &img[(oy + y) * w + ox..(oy + y) * w + ox + p + 1];
        let r1 = &img[(oy + y + 1) * w + ox..(oy + y + 1) * w + ox + p + 1];
        for x in 0..p {
            out.push(w00 * r0[x] + w10 * r0[x + 1] + w01 * r1[x] + w11 * r1[x + 1]);
        }
    }
}

#[derive(Clone, Copy)]
struct PatchFit {
    u: f32,
    v: f32,
    /// Mean squared residual at `(u, v)`.
    msr: f32,
}

/// Mean squared difference between the patch of `l1` and `l2` displaced by `(u, v)`.
fn patch_msr(l1: &Level, l2: &Level, (px, py, p): (usize, usize, usize), (u, v): (f32, f32), scratch: &mut Vec<f32>) -> f32 {
    let w = l1.width;
    warp_patch(l2, px, py, p, u, v, scratch);
    let mut ssd = 0.0f32;
    for (k, y) in (py..py + p).enumerate() {
        let t = &l1.image[y * w + px..y * w + px + p];
        for (a, b) in scratch[k * p..(k + 1) * p].iter().zip(t) {
            ssd += (a - b) * (a - b);
        }
    }
    ssd / (p * p) as f32
}

/// Lowest-residual start among `candidates`; ties keep the earliest.
fn pick_start(l1: &Level, l2: &Level, patch: (usize, usize, usize), candidates: &[(f32, f32)], scratch: &mut Vec<f32>) -> (f32, f32) {
    let mut best = (f32::INFINITY, candidates[0]);
    for &c in candidates {
        let m = patch_msr(l1, l2, patch, c, scratch);
        if m < best.0 {
            best = (m, c);
        }
    }
    best.1
}

/// Inverse-compositional translation fit of the `p`×`p` patch at `(px, py)`.
fn fit_patch(
    l1: &Level,
    l2: &Level,
    (px, py, p): (usize, usize, usize),
    init: (f32, f32),
    params: &FlowParams,
    scratch: &mut Vec<f32>,
) -> PatchFit {
    let w = l1.width;
    let (mut sxx, mut sxy, mut syy) = (0.0f32, 0.0f32, 0.0f32);
    for y in py..py + p {
        for x in px..px + p {
            let (gx, gy) = (l1.grad_x[y * w + x], l1.grad_y[y * w + x]);
            sxx += gx * gx;
            sxy += gx * gy;
            syy += gy * gy;
        }
    }
    let det = sxx * syy - sxy * sxy;
    let (mut u, mut v) = init;
    // (msr, u, v) of the best iterate seen so far
    let mut best = (f32::INFINITY, u, v);
    let mut steps_left = if det >= MIN_DETERMINANT { params.iterations } else { 0 };
    let inv = 1.0 / det;
    let (lim_x, lim_y) = (l1.width as f32 / 2.0, l1.height as f32 / 2.0);
    loop {
        warp_patch(l2, px, py, p, u, v, scratch);
        let (mut bx, mut by, mut ssd) = (0.0f32, 0.0f32, 0.0f32);
        for (k, y) in (py..py + p).enumerate() {
            let row = y * w + px;
            let warped = &scratch[k * p..(k + 1) * p];
            let (t, gx, gy) = (&l1.image[row..row + p], &l1.grad_x[row..row + p], &l1.grad_y[row..row + p]);
            for x in 0..p {
                let e = warped[x] - t[x];
                bx += gx[x] * e;
                by += gy[x] * e;
                ssd += e * e;
            }
        }
        let msr = ssd / (p * p) as f32;
        if msr < best.0 {
            best = (msr, u, v);
        }
        if steps_left == 0 {
            break;
        }
        steps_left -= 1;
        let du = inv * (syy * bx - sxy * by);
        let dv = inv * (sxx * by - sxy * bx);
        if !du.is_finite() || !dv.is_finite() {
            break;
        }
        u = (u - du).clamp(-lim_x, lim_x);
        v = (v - dv).clamp(-lim_y, lim_y);
        if (du * du + dv * dv).sqrt() < params.min_update {
            // score the converged iterate, then stop
            steps_left = 0;
        }
    }
    let (msr, u, v) = best;
    PatchFit { u, v, msr }
}

/// Integer displacement in `[-radius, radius]²` minimizing the patch SSD;
/// ties go to the earliest candidate in scan order, which starts at zero.
fn search_patch(l1: &Level, l2: &Level, patch: (usize, usize, usize), radius: isize, scratch: &mut Vec<f32>) -> (f32, f32) {
    let candidates: Vec<(f32, f32)> = std::iter::once((0, 0))
        .chain((-radius..=radius).flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy))))
        .map(|(dx, dy)| (dx as f32, dy as f32))
        .collect();
    pick_start(l1, l2, patch, &candidates, scratch)
}

/// Patch fits at one level. A forward raster pass starts each patch from the
/// best of its initialization and its left and upper neighbours' fits; a
/// backward pass then offers each patch its right and lower neighbours' fits.
fn refine_level(l1: &Level, l2: &Level, init: &Dense, search: bool, params: &FlowParams) -> Dense {
    let (w, h) = (l1.width, l1.height);
    let p = params.patch_size.min(w).min(h);
    let xs = grid(w, p, params.stride);
    let ys = grid(h, p, params.stride);
    let (nx, ny) = (xs.len(), ys.len());
    let mut scratch = Vec::with_capacity(p * p);
    let mut fits: Vec<PatchFit> = Vec::with_capacity(nx * ny);
    for (j, &py) in ys.iter().enumerate() {
        for (i, &px) in xs.iter().enumerate() {
            let patch = (px, py, p);
            let c = (py + p / 2).min(h - 1) * w + (px + p / 2).min(w - 1);
            let mut candidates = vec![if search {
                search_patch(l1, l2, patch, (p / 2) as isize, &mut scratch)
            } else {
                (init.u[c], init.v[c])
            }];
            if i > 0 {
                let f = fits[j * nx + i - 1];
                candidates.push((f.u, f.v));
            }
            if j > 0 {
                let f = fits[(j - 1) * nx + i];
                candidates.push((f.u, f.v));
            }
            let start = pick_start(l1, l2, patch, &candidates, &mut scratch);
            fits.push(fit_patch(l1, l2, patch, start, params, &mut scratch));
        }
    }
    for j in (0..ny).rev() {
        for i in (0..nx).rev() {
            let patch = (xs[i], ys[j], p);
            let own = fits[j * nx + i];
            let mut candidates = vec![(own.u, own.v)];
            if i + 1 < nx {
                let f = fits[j * nx + i + 1];
                candidates.push((f.u, f.v));
            }
            if j + 1 < ny {
                let f = fits[(j + 1) * nx + i];
                candidates.push((f.u, f.v));
            }
            let start = pick_start(l1, l2, patch, &candidates, &mut scratch);
            if start != (own.u, own.v) {
                let fit = fit_patch(l1, l2, patch, start, params, &mut scratch);
                if fit.msr < own.msr {
                    fits[j * nx + i] = fit;
                }
            }
        }
    }
    let (mut acc_u, mut acc_v, mut acc_w) = (vec![0.0f32; w * h], vec![0.0f32; w * h], vec![0.0f32; w * h]);
    for (j, &py) in ys.iter().enumerate() {
        for (i, &px) in xs.iter().enumerate() {
            let fit = fits[j * nx + i];
            let weight = 1.0 / (1.0 + fit.msr / params.temperature);
            for y in py..py + p {
                for x in px..px + p {
                    let k = y * w + x;
                    acc_u[k] += weight * fit.u;
                    acc_v[k] += weight * fit.v;
                    acc_w[k] += weight;
                }
            }
        }
    }
    let mut out = Dense::zeros(w, h);
    for k in 0..w * h {
        if acc_w[k] > 0.0 {
            out.u[k] = acc_u[k] / acc_w[k];
            out.v[k] = acc_v[k] / acc_w[k];
        }
    }
    out
}

/// Coarse-to-fine flow between two prepared pyramids of equal shape.
pub fn estimate_flow_pyramids(p1: &Pyramid, p2: &Pyramid, params: &FlowParams) -> Result<FlowField> {
    let (a, b) = (p1.levels.last(), p2.levels.last());
    let (Some(a), Some(b)) = (a, b) else {
        return Err(FlowError::InvalidParams("empty pyramid".into()));
    };
    if (a.width, a.height) != (b.width, b.height) || p1.levels.len() != p2.levels.len() {
        return Err(FlowError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let coarse = &p1.levels[0];
    let mut dense = Dense::zeros(coarse.width, coarse.height);
    for (k, (l1, l2)) in p1.levels.iter().zip(&p2.levels).enumerate() {
        if (dense.width, dense.height) != (l1.width, l1.height) {
            dense = dense.upscale(l1.width, l1.height);
        }
        dense = refine_level(l1, l2, &dense, k == 0, params);
    }
    Ok(FlowField {
        width: dense.width,
        height: dense.height,
        u: dense.u,
        v: dense.v,
    })
}

fn pair_params(f: &FrameImage, params: &FlowParams) -> FlowParams {
    FlowParams {
        levels: params.effective_levels(f.width, f.height),
        ..params.clone()
    }
}

/// Dense flow mapping `f1` onto `f2` (`f2(p + F(p)) ≈ f1(p)`).
pub fn estimate_flow_pair(f1: &FrameImage, f2: &FrameImage, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if (f1.width, f1.height) != (f2.width, f2.height) {
        return Err(FlowError::DimensionMismatch(f1.width, f1.height, f2.width, f2.height));
    }
    let eff = pair_params(f1, params);
    let p1 = build_pyramid(f1, &eff)?;
    let p2 = build_pyramid(f2, &eff)?;
    estimate_flow_pyramids(&p1, &p2, &eff)
}

/// Sequential flow over a frame stream, building each pyramid once.
pub struct FlowStream {
    params: FlowParams,
    prev: Option<Pyramid>,
}

impl FlowStream {
    pub fn new(params: FlowParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, prev: None })
    }

    /// Feeds the next frame; returns the flow from the previous frame, if any.
    pub fn push(&mut self, frame: &FrameImage) -> Result<Option<FlowField>> {
        let eff = pair_params(frame, &self.params);
        let pyr = build_pyramid(frame, &eff)?;
        let out = match &self.prev {
            Some(prev) => Some(estimate_flow_pyramids(prev, &pyr, &eff)?),
            None => None,
        };
        self.prev = Some(pyr);
        Ok(out)
    }
}
