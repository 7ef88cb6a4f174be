use vidphase::features::{dim, extract_features};
use vidphase::motion::{boundary_estimate, cumulative_signal, direction_measure, MotionParams};
use vidphase::synth::*;

fn cfg(frames: usize) -> SynthConfig {
    SynthConfig {
        total_frames: frames,
        ..Default::default()
    }
}

fn still(mean: f64) -> PhaseMotion {
    PhaseMotion {
        velocity_mean: mean,
        velocity_jitter: 0.0,
        pause_prob: 0.0,
        slip_prob: 0.0,
    }
}

#[test]
fn transition_frame_from_fraction() {
    let (s, gt) = make_schedule(&cfg(1200)).unwrap();
    assert_eq!(s.transition_frame, 480);
    assert_eq!(gt.transition_frame, 480);
    assert_eq!(s.velocity.len(), 1200);
    assert!(gt.phases.iter().enumerate().all(|(t, &p)| (p == 1) == (t < 480)));
}

#[test]
fn noiseless_closed_form() {
    let c = SynthConfig {
        intubation: still(1.0),
        withdrawal: still(-1.0),
        ..cfg(1200)
    };
    let (s, _) = make_schedule(&c).unwrap();
    let sums = cumulative_signal(&s.velocity);
    for (t, &v) in sums.iter().enumerate() {
        let expect = t.min(480) as f64 - t.saturating_sub(480) as f64;
        assert_eq!(v, expect, "t = {t}");
    }
    assert_eq!(boundary_estimate(&sums), 480);
}

#[test]
fn prefix_sum_peaks_at_transition() {
    for seed in 0..20 {
        let c = SynthConfig { seed, ..cfg(1200) };
        let (s, gt) = make_schedule(&c).unwrap();
        let sums = cumulative_signal(&s.velocity);
        let peak = sums[gt.transition_frame];
        let above = sums.iter().enumerate().filter(|&(t, &v)| t != gt.transition_frame && v >= peak).count();
        assert_eq!(above, 0, "seed {seed}: maximum is not unique at the transition");
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&s.velocity[..480]) > 0.0);
        assert!(mean(&s.velocity[480..]) < 0.0);
    }
}

#[test]
fn invalid_fraction_is_rejected() {
    for f in [0.0, 1.0, -0.2, 1.5] {
        let c = SynthConfig {
            transition_fraction: f,
            ..cfg(200)
        };
        assert!(make_schedule(&c).is_err(), "fraction {f}");
    }
}

#[test]
fn noiseless_flow_is_exact_radial() {
    let c = SynthConfig {
        flow_noise_sigma: 0.0,
        outlier_fraction: 0.0,
        foe_jitter: 0.0,
        ..cfg(120)
    };
    let mut velocity = vec![1.0; 48];
    velocity.resize(120, 0.0);
    let s = MotionSchedule {
        velocity,
        transition_frame: 48,
        total_frames: 120,
    };
    let fields = synth_flow_fields(&s, &c).unwrap();
    assert_eq!(fields.len(), 119);
    let sc = 1.0 / c.zoom_radius;
    let f = &fields[0];
    for y in 0..64 {
        for x in 0..64 {
            let (u, v) = f.at(x, y);
            assert_eq!(u, (sc * (x as f64 - 31.5)) as f32);
            assert_eq!(v, (sc * (y as f64 - 31.5)) as f32);
        }
    }
    let last = fields.last().unwrap();
    assert!(last.u.iter().chain(&last.v).all(|&x| x == 0.0));
}

#[test]
fn noisy_flow_sign_agrees_with_velocity() {
    let c = cfg(1200);
    let (s, _) = make_schedule(&c).unwrap();
    let fields = synth_flow_fields(&s, &c).unwrap();
    let p = MotionParams::default();
    let (mut agree, mut moving) = (0, 0);
    for (f, &vel) in fields.iter().zip(&s.velocity) {
        if vel == 0.0 {
            continue;
        }
        moving += 1;
        if direction_measure(f, &p).unwrap().signum() == vel.signum() {
            agree += 1;
        }
    }
    let rate = agree as f64 / moving as f64;
    assert!(rate >= 0.9, "sign agreement {rate}");
}

#[test]
fn rendering_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(100);
    write_video(&c, &dir.path().join("a"), false).unwrap();
    write_video(&c, &dir.path().join("b"), false).unwrap();
    for t in [0, 50, 99] {
        let name = format!("frames/frame_{t:06}.pgm");
        let a = std::fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn phase_two_is_brighter() {
    let c = cfg(1200);
    let (s, gt) = make_schedule(&c).unwrap();
    let (frames, _) = render_frames(&s, &c).unwrap();
    let mean = |f: &vidphase::dataio::FrameImage| f.data.iter().map(|&v| v as f64).sum::<f64>() / f.data.len() as f64;
    let (a, b) = frames.split_at(gt.transition_frame);
    let m1 = a.iter().map(mean).sum::<f64>() / a.len() as f64;
    let m2 = b.iter().map(mean).sum::<f64>() / b.len() as f64;
    assert!(m2 > m1, "phase means {m1} vs {m2}");
}

#[test]
fn wall_contact_frames_are_flat_and_bright() {
    let mut c = cfg(200);
    c.intubation_look.wall_contact_prob = 1.0;
    c.withdrawal_look.wall_contact_prob = 0.0;
    let (s, gt) = make_schedule(&c).unwrap();
    let (frames, _) = render_frames(&s, &c).unwrap();
    let feats: Vec<_> = frames.iter().map(|f| extract_features(f, None)).collect();
    let contact = &feats[0];
    assert!(contact[dim::DARK_FRACTION] < 0.01, "dark fraction {}", contact[dim::DARK_FRACTION]);
    let tunnel_min = feats[gt.transition_frame..]
        .iter()
        .map(|f| f[dim::GRADIENT_ENERGY])
        .fold(f32::MAX, f32::min);
    assert!(contact[dim::GRADIENT_ENERGY] < tunnel_min);
}

#[test]
fn rendered_flow_is_radial() {
    let mut c = SynthConfig {
        intubation: still(1.0),
        withdrawal: still(-1.0),
        motion_noise_sigma: 0.0,
        foe_jitter: 0.0,
        brightness_jitter: 0.0,
        lumen_jitter: 0.0,
        sensor_noise: 0.0,
        ..cfg(120)
    };
    c.intubation_look.wall_contact_prob = 0.0;
    c.withdrawal_look.wall_contact_prob = 0.0;
    let (s, _) = make_schedule(&c).unwrap();
    let (frames, _) = render_frames(&s, &c).unwrap();
    let fields = vidphase::flow::estimate_flow_frames(&frames, &Default::default()).unwrap();
    let p = MotionParams::default();
    let d: Vec<f64> = fields.iter().map(|f| direction_measure(f, &p).unwrap()).collect();
    let fwd = d[..40].iter().filter(|&&x| x > 0.0).count();
    let bwd = d[50..].iter().filter(|&&x| x < 0.0).count();
    assert!(fwd >= 36, "forward pairs with expansion: {fwd}/40");
    assert!(bwd as f64 >= 0.9 * (d.len() - 50) as f64, "backward pairs with contraction: {bwd}");
}
