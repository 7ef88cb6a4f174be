mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidphase::dataio::FrameImage;
use vidphase::features::*;
use vidphase::synth::{make_schedule, render_frames, SynthConfig};

fn flat(v: u8) -> FrameImage {
    FrameImage::gray(16, 16, vec![v; 256]).unwrap()
}

#[test]
fn black_and_white_examples() {
    let b = extract_features(&flat(0), None);
    assert_eq!((b[dim::MEAN], b[dim::STD], b[dim::DARK_FRACTION], b[dim::GRADIENT_ENERGY]), (0.0, 0.0, 1.0, 0.0));
    let w = extract_features(&flat(255), None);
    assert_eq!((w[dim::BRIGHT_FRACTION], w[dim::DARK_FRACTION]), (1.0, 0.0));
    assert_eq!(w[dim::FRAME_DIFF_ENERGY], 0.0);
}

#[test]
fn histograms_are_distributions_and_finite() {
    for seed in 0..10 {
        let img = common::random_texture(48, 40, seed, 1);
        let prev = common::random_texture(48, 40, seed + 100, 1);
        let f = extract_features(&img, Some(&prev));
        let s: f64 = f[..HIST_BINS].iter().map(|&x| x as f64).sum();
        assert!((s - 1.0).abs() <= 1e-6);
        assert!(f.iter().all(|x| x.is_finite()));
        assert_eq!(&f[24..], &[0.0, 0.0]);
        assert!(f[dim::FRAME_DIFF_ENERGY] > 0.0);
    }
}

#[test]
fn intensity_scaling_keeps_histogram_valid() {
    let img = common::random_texture(32, 32, 4, 2);
    let dim_img = FrameImage::gray(32, 32, img.data.iter().map(|&v| v / 3).collect()).unwrap();
    let (a, b) = (extract_features(&img, None), extract_features(&dim_img, None));
    let s: f32 = b[..HIST_BINS].iter().sum();
    assert!((s - 1.0).abs() <= 1e-6);
    assert!(b[dim::MEAN] < a[dim::MEAN]);
}

#[test]
fn phase_two_mean_brightness_is_higher() {
    let c = SynthConfig {
        total_frames: 600,
        ..Default::default()
    };
    let (s, gt) = make_schedule(&c).unwrap();
    let (frames, _) = render_frames(&s, &c).unwrap();
    let f = extract_sequence(&frames);
    let avg = |r: &[FeatureVector]| r.iter().map(|v| v[dim::MEAN] as f64).sum::<f64>() / r.len() as f64;
    let (a, b) = f.split_at(gt.transition_frame);
    assert!(avg(b) > avg(a));
    assert_eq!(f[0][dim::FRAME_DIFF_ENERGY], 0.0);
    assert_eq!(f[5], extract_features(&frames[5], Some(&frames[4])));
}

#[test]
fn normalizer_degenerate_and_closed_form() {
    let rows = vec![[3.0f32; 4]; 10];
    let n = fit_normalizer(&rows);
    assert!(n.std.iter().all(|&s| s == STD_FLOOR));
    assert!(n.apply(&rows[0]).iter().all(|&x| x == 0.0));

    let rows = vec![[-1.0f32; 3], [1.0f32; 3]];
    let n = fit_normalizer(&rows);
    assert_eq!(apply_normalizer(&n, &rows[0]), vec![-1.0; 3]);
    assert_eq!(apply_normalizer(&n, &rows[1]), vec![1.0; 3]);
}

#[test]
fn normalizer_matches_two_pass_oracle_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f32>> = (0..500)
        .map(|_| (0..FEATURE_DIM).map(|d| rng.random_range(-1.0..1.0) * (d as f32 + 1.0) + d as f32).collect())
        .collect();
    let n = fit_normalizer(&rows);
    for d in 0..FEATURE_DIM {
        let col: Vec<f64> = rows.iter().map(|r| r[d] as f64).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64;
        assert!((n.mean[d] - m).abs() <= 1e-12 * m.abs().max(1.0));
        assert!((n.std[d] - v.sqrt()).abs() <= 1e-12 * v.sqrt());
    }
    let normed: Vec<Vec<f32>> = rows.iter().map(|r| n.apply(r)).collect();
    let again = fit_normalizer(&normed);
    assert!(again.mean.iter().all(|m| m.abs() <= 1e-6));
    assert!(again.std.iter().all(|s| (s - 1.0).abs() <= 1e-3));
}
