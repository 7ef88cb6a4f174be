//! Shared fixtures for integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vidphase::dataio::{FrameImage, VectorField};
use vidphase::frameclf::{init_model, Mlp, TrainConfig};
use vidphase::nn::relative_error;
use vidphase::tcn::{init_tcn, TcnConfig};

/// White noise blurred by a separable box filter applied `passes` times
/// (radius 1, circular), stretched to the full 8-bit range.
pub fn random_texture(w: usize, h: usize, seed: u64, passes: usize) -> FrameImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    for _ in 0..passes {
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = (img[y * w + (x + w - 1) % w] + img[y * w + x] + img[y * w + (x + 1) % w]) / 3.0;
            }
        }
        for y in 0..h {
            for x in 0..w {
                img[y * w + x] = (tmp[((y + h - 1) % h) * w + x] + tmp[y * w + x] + tmp[((y + 1) % h) * w + x]) / 3.0;
            }
        }
    }
    let (lo, hi) = img.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let data = img.iter().map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8).collect();
    FrameImage::gray(w, h, data).unwrap()
}

/// `out(x, y) = img(x − dx, y − dy)` with wrap-around: content moves by `(dx, dy)`.
pub fn circular_shift(img: &FrameImage, dx: isize, dy: isize) -> FrameImage {
    let (w, h) = (img.width as isize, img.height as isize);
    let data = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| img.data[((y - dy).rem_euclid(h) * w + (x - dx).rem_euclid(w)) as usize])
        .collect();
    FrameImage::gray(img.width, img.height, data).unwrap()
}

/// Mean and max endpoint error against a constant `(du, dv)` over the
/// central crop keeping `keep` of each dimension.
pub fn crop_endpoint_error(f: &VectorField<f32>, du: f64, dv: f64, keep: f64) -> (f64, f64) {
    let mx = ((1.0 - keep) / 2.0 * f.width as f64).round() as usize;
    let my = ((1.0 - keep) / 2.0 * f.height as f64).round() as usize;
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0);
    for y in my..f.height - my {
        for x in mx..f.width - mx {
            let (u, v) = f.at(x, y);
            let e = ((u as f64 - du).powi(2) + (v as f64 - dv).powi(2)).sqrt();
            sum += e;
            max = max.max(e);
            n += 1;
        }
    }
    (sum / n as f64, max)
}

pub fn crop_mean(f: &VectorField<f32>, keep: f64) -> (f64, f64) {
    let mx = ((1.0 - keep) / 2.0 * f.width as f64).round() as usize;
    let my = ((1.0 - keep) / 2.0 * f.height as f64).round() as usize;
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0);
    for y in my..f.height - my {
        for x in mx..f.width - mx {
            let (u, v) = f.at(x, y);
            su += u as f64;
            sv += v as f64;
            n += 1;
        }
    }
    (su / n as f64, sv / n as f64)
}

/// Smooth random field: a random affine expansion about a random center plus
/// `terms` sinusoids per component with at most `max_cycles` periods across
/// the image.
pub fn band_limited_field(n: usize, seed: u64, terms: usize, max_cycles: f64) -> vidphase::dataio::VectorField<f64> {
    use std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64, f64, f64)> {
        (0..terms)
            .map(|_| {
                let fx = rng.random_range(-max_cycles..=max_cycles) / n as f64;
                let fy = rng.random_range(-max_cycles..=max_cycles) / n as f64;
                (rng.random_range(-1.0..1.0), fx, fy, rng.random_range(0.0..TAU))
            })
            .collect()
    };
    let wu = waves(&mut rng);
    let wv = waves(&mut rng);
    let s = rng.random_range(0.02..0.05) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (cx, cy) = (rng.random_range(0.0..n as f64), rng.random_range(0.0..n as f64));
    let eval = |w: &[(f64, f64, f64, f64)], x: f64, y: f64| -> f64 {
        w.iter().map(|&(a, fx, fy, ph)| a * (TAU * (fx * x + fy * y) + ph).sin()).sum()
    };
    vidphase::dataio::VectorField::from_fn(n, n, |x, y| (s * (x - cx) + eval(&wu, x, y), s * (y - cy) + eval(&wv, x, y)))
}

/// Two isotropic unit-variance 2-D blobs, each mean 4σ from the separating
/// line (Bayes error ≈ 3e-5); returns
/// features, true classes (phase 1/2) and the labels used for training.
pub fn blobs(n: usize, flip: f64, same_mean: bool, seed: u64) -> (Vec<Vec<f32>>, Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut truth, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let c = (i % 2) as u8 + 1;
        let m = if same_mean { 0.0 } else if c == 1 { -4.0 } else { 4.0 };
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        xs.push(vec![(m + x) as f32, y as f32]);
        truth.push(c);
        labels.push(if rng.random_bool(flip) { 3 - c } else { c });
    }
    (xs, truth, labels)
}

pub fn accuracy(m: &Mlp<f32>, xs: &[Vec<f32>], truth: &[u8]) -> f64 {
    let hits = xs
        .iter()
        .zip(truth)
        .filter(|(x, &c)| {
            let p = m.predict_proba(x).unwrap();
            (p[1] > p[0]) as u8 + 1 == c
        })
        .count();
    hits as f64 / xs.len() as f64
}

pub fn blob_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 30,
        batch_size: 32,
        samples_per_class: 1000,
        ..TrainConfig::default()
    }
}

fn loss_at(m: &Mlp<f64>, xs: &[Vec<f64>], cs: &[usize]) -> f64 {
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    m.loss_and_grad(&refs, cs).0
}

/// Max relative error between backprop and central differences, with both
/// evaluated at 64 bits from the 32-bit parameter values.
pub fn mlp_grad_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..6);
    let hidden = rng.random_range(2..6);
    let model32 = init_model::<f32>(&[input, hidden, 2], seed).unwrap();
    let mut m = model32.cast::<f64>();
    for b in m.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
        *b = rng.random_range(-0.5..0.5) as f32 as f64;
    }
    let xs: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0f32) as f64).collect())
        .collect();
    let cs: Vec<usize> = (0..6).map(|_| rng.random_range(0..2)).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (_, grad) = m.loss_and_grad(&refs, &cs);
    let analytic: Vec<f64> = grad.params().copied().collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *m.params().nth(i).unwrap();
        *m.params_mut().nth(i).unwrap() = orig + h;
        let up = loss_at(&m, &xs, &cs);
        *m.params_mut().nth(i).unwrap() = orig - h;
        let down = loss_at(&m, &xs, &cs);
        *m.params_mut().nth(i).unwrap() = orig;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
    }
    worst
}

pub fn random_rows(len: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0f32) as f64).collect())
        .collect()
}

/// Backprop vs central differences at 64 bits from 32-bit parameters.
pub fn tcn_grad_check(cfg: &TcnConfig, len: usize, dim: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = init_tcn::<f32>(cfg, dim, seed).unwrap().cast::<f64>();
    for p in m.params_mut() {
        *p += rng.random_range(-0.1..0.1f32) as f64;
    }
    let rows = random_rows(len, dim, &mut rng);
    let labels: Vec<u8> = (0..len).map(|_| rng.random_range(1..=2)).collect();
    let (_, grad) = m.loss_and_grad(&rows, &labels, cfg.lambda, cfg.tau).unwrap();
    let analytic: Vec<f64> = grad.params().copied().collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *m.params().nth(i).unwrap();
        let mut at = |v: f64| {
            *m.params_mut().nth(i).unwrap() = v;
            m.loss_and_grad(&rows, &labels, cfg.lambda, cfg.tau).unwrap().0.total
        };
        let numeric = (at(orig + h) - at(orig - h)) / (2.0 * h);
        at(orig);
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}
