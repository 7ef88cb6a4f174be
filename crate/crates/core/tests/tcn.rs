mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidphase::tcn::{init_tcn, loss, train_tcn, MsTcn, TcnConfig};

fn tiny(stages: usize, layers: usize, channels: usize) -> TcnConfig {
    TcnConfig {
        stages,
        layers,
        channels,
        ..TcnConfig::default()
    }
}

#[test]
fn gradient_check_reference_config() {
    let err = common::tcn_grad_check(&tiny(1, 2, 4), 12, 3, 0);
    assert!(err <= 1e-6, "relative error {err}");
}

#[test]
fn gradient_check_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..10 {
        let cfg = tiny(rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(2..=5));
        let len = rng.random_range(1..=14);
        let dim = rng.random_range(1..=4);
        let err = common::tcn_grad_check(&cfg, len, dim, k);
        assert!(err <= 1e-6, "config {cfg:?}, T={len}, D={dim}: relative error {err}");
    }
}

/// Direct transcription of the loss formula with plain loops.
fn reference_loss(probs: &[Vec<[f64; 2]>], labels: &[u8], lambda: f64, tau: f64) -> f64 {
    let mut total = 0.0;
    for stage in probs {
        let t_len = stage.len();
        let mut ce = 0.0;
        for t in 0..t_len {
            ce += -(stage[t][labels[t] as usize - 1]).ln();
        }
        total += ce / t_len as f64;
        if t_len > 1 {
            let mut acc = 0.0;
            for t in 1..t_len {
                for c in 0..2 {
                    let d = stage[t][c].ln() - stage[t - 1][c].ln();
                    acc += if d * d > tau * tau { tau * tau } else { d * d };
                }
            }
            total += lambda * acc / ((t_len - 1) * 2) as f64;
        }
    }
    total
}

#[test]
fn loss_matches_reference_and_training_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = tiny(3, 2, 4);
    let m = init_tcn::<f64>(&cfg, 3, 1).unwrap();
    let rows = common::random_rows(20, 3, &mut rng);
    let labels: Vec<u8> = (0..20).map(|t| 1 + (t >= 9) as u8).collect();
    let probs = m.forward(&rows).unwrap();
    let l = loss(&probs, &labels, 0.15, 4.0);
    assert!((l.total - reference_loss(&probs, &labels, 0.15, 4.0)).abs() < 1e-12);
    let (parts, _) = m.loss_and_grad(&rows, &labels, 0.15, 4.0).unwrap();
    assert!((parts.total - l.total).abs() < 1e-9);

    // sharp random probabilities exercise the truncation
    let sharp: Vec<Vec<[f64; 2]>> = (0..2)
        .map(|_| {
            (0..20)
                .map(|_| {
                    let p = 10f64.powf(-rng.random_range(0.0..6.0));
                    if rng.random_bool(0.5) { [p, 1.0 - p] } else { [1.0 - p, p] }
                })
                .collect()
        })
        .collect();
    let l = loss(&sharp, &labels, 0.15, 2.0);
    assert!((l.total - reference_loss(&sharp, &labels, 0.15, 2.0)).abs() < 1e-9);
}

#[test]
fn outputs_are_normalized_and_shaped() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = init_tcn::<f64>(&TcnConfig::default(), 5, 3).unwrap();
    let out = m.forward(&common::random_rows(16, 5, &mut rng)).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|s| s.len() == 16));
    assert!(out.iter().flatten().all(|p| (p[0] + p[1] - 1.0).abs() < 1e-6));
    assert_eq!(m.forward(&common::random_rows(1, 5, &mut rng)).unwrap()[1].len(), 1);
    assert!(m.forward(&[]).is_err());
    assert!(m.forward(&common::random_rows(3, 4, &mut rng)).is_err());
}

/// Feature 0 flips sign at the phase boundary under heavy frame noise.
fn learnable_task(n: usize, seed: u64) -> (Vec<Vec<Vec<f32>>>, Vec<Vec<u8>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let len = rng.random_range(80..120);
        let b = rng.random_range(20..len - 20);
        xs.push(
            (0..len)
                .map(|t| {
                    let s = if t < b { -0.5 } else { 0.5 };
                    vec![s + rng.random_range(-1.0..1.0f32), rng.random_range(-1.0..1.0f32)]
                })
                .collect(),
        );
        ys.push((0..len).map(|t| 1 + (t >= b) as u8).collect());
    }
    (xs, ys)
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let (xs, ys) = learnable_task(8, 0);
    let cfg = TcnConfig {
        channels: 8,
        layers: 4,
        epochs: 5,
        learning_rate: 1e-2,
        ..TcnConfig::default()
    };
    let init = init_tcn::<f32>(&cfg, 2, 0).unwrap();
    let (a, report) = train_tcn(init.clone(), &xs, &ys, &cfg).unwrap();
    assert_eq!(report.epoch_loss.len(), 5);
    assert!(report.epoch_loss[4] < report.epoch_loss[0], "{:?}", report.epoch_loss);
    assert!(a.is_finite());
    let (b, _) = train_tcn(init, &xs, &ys, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn model_directory_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let m = init_tcn::<f32>(&TcnConfig::default(), 16, 9).unwrap();
    m.save(dir.path()).unwrap();
    assert_eq!(MsTcn::<f32>::load(dir.path()).unwrap(), m);
    let full = MsTcn::<f32>::zeros(&TcnConfig::full_scale(), 16).unwrap();
    assert_eq!(full.stage_receptive_field(), 2047);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interior_frames_are_shift_equivariant(seed in 0u64..1000, shift in 1usize..20, len in 40usize..70) {
        let cfg = tiny(2, 3, 4);
        let m = init_tcn::<f64>(&cfg, 2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(len, 2, &mut rng);
        let mut shifted = common::random_rows(shift, 2, &mut rng);
        shifted.extend(rows.iter().cloned());
        let a = m.forward(&rows).unwrap();
        let b = m.forward(&shifted).unwrap();
        let reach = m.receptive_field() / 2;
        for s in 0..2 {
            for t in reach..len.saturating_sub(reach) {
                prop_assert_eq!(a[s][t], b[s][t + shift]);
            }
        }
    }
}
