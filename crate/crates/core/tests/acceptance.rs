//! Acceptance criteria. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidphase::dataio::VectorField;
use vidphase::eval::{mae_medae, median, prepare_synthetic, run_methods, run_pipeline, PipelineConfig, PipelineOptions};
use vidphase::flow::{estimate_flow_pair, FlowParams};
use vidphase::frameclf::train;
use vidphase::motion::{boundary_estimate, boundary_flux, cumulative_signal, direction_measure, divergence_sum, MotionParams, Region};
use vidphase::tcn::{init_tcn, receptive_field, TcnConfig};
use vidphase::transition::{detect_transition, partition_score, PhaseProbs};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {n} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

#[test]
fn c01_green_equivalence() {
    let start = Instant::now();
    let region = Region::centered(256, 256, 0.8).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let f = common::band_limited_field(256, 1000 + seed, 6, 4.0);
        let flux = boundary_flux(&f, &region).unwrap();
        let div = divergence_sum(&f, &region).unwrap();
        worst = worst.max((flux - div).abs() / div.abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 0.02 && elapsed < Duration::from_secs(30);
    verdict(1, "green-equivalence", pass, &format!("max relative gap {worst:.2e} over 100 fields, {elapsed:.2?}"));
}

#[test]
fn c02_foe_invariance_and_translation_rejection() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = MotionParams::default();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s: f64 = rng.random_range(-2.0..2.0);
        let (px, py) = (rng.random_range(-64.0..192.0), rng.random_range(-64.0..192.0));
        let f: VectorField<f64> = VectorField::from_fn(128, 128, |x, y| (s * (x - px), s * (y - py)));
        worst = worst.max((direction_measure(&f, &p).unwrap() - 2.0 * s).abs());
    }
    let mut constant_ok = true;
    for _ in 0..50 {
        let (a, b) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let f64_field: VectorField<f64> = VectorField::from_fn(97, 64, |_, _| (a, b));
        let f32_field: VectorField<f32> = f64_field.cast();
        constant_ok &= direction_measure(&f64_field, &p).unwrap() == 0.0;
        constant_ok &= direction_measure(&f32_field, &p).unwrap() == 0.0;
    }
    let pass = worst <= 1e-6 && constant_ok;
    verdict(2, "foe-invariance", pass, &format!("max |measure - 2s| {worst:.2e} over 50 foci, constant fields exactly 0: {constant_ok}"));
}

#[test]
fn c03_flow_sanity() {
    let params = FlowParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut still_max, mut worst_epe) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let img = common::random_texture(64, 64, 300 + k, 2);
        let f = estimate_flow_pair(&img, &img, &params).unwrap();
        still_max = still_max.max(f.u.iter().chain(&f.v).fold(0.0f64, |m, &x| m.max(x.abs() as f64)));
        let (dx, dy) = (rng.random_range(-8i32..=8) as isize, rng.random_range(-8i32..=8) as isize);
        let g = estimate_flow_pair(&img, &common::circular_shift(&img, dx, dy), &params).unwrap();
        let (epe, _) = common::crop_endpoint_error(&g, dx as f64, dy as f64, 0.8);
        worst_epe = worst_epe.max(epe);
    }
    let pass = still_max <= 0.05 && worst_epe <= 0.5;
    verdict(3, "flow-sanity", pass, &format!("identical-pair max {still_max:.3e} px, worst mean EPE {worst_epe:.3} px over 20 textures"));
}

#[test]
fn c04_detector_oracle() {
    type Q = Ratio<i64>;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut matches, mut reductions) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..64);
        let probs: Vec<[Q; 2]> = (0..n)
            .map(|_| {
                let a = Q::new(rng.random_range(0..=12), 12);
                [a, Q::from_integer(1) - a]
            })
            .collect();
        let got = detect_transition(&PhaseProbs::new(probs.clone(), 30.0)).unwrap();
        let mut best = (0, partition_score(&probs, 0));
        for t in 1..=n {
            let l = partition_score(&probs, t);
            if l > best.1 {
                best = (t, l);
            }
        }
        matches += ((got.frame, got.score) == best) as usize;
        let d: Vec<Q> = probs.iter().map(|p| p[0] - p[1]).collect();
        reductions += (boundary_estimate(&cumulative_signal(&d)) == got.frame) as usize;
    }
    let pass = matches == 1000 && reductions == 1000;
    verdict(4, "detector-oracle", pass, &format!("{matches}/1000 exact matches, {reductions}/1000 reduction identities"));
}

#[test]
fn c05_ablation_ordering() {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..3 {
        let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
        let ab = run_methods(&prepare_synthetic(&cfg).unwrap(), &cfg).unwrap();
        let (a, d) = (&ab.reports[0], &ab.reports[3]);
        assert_eq!((a.method.as_str(), d.method.as_str()), ("a-motion-baseline", "d-tcn-classifier"));
        let mae_cut = 1.0 - d.mae_minutes / a.mae_minutes;
        let medae_cut = 1.0 - d.medae_minutes / a.medae_minutes;
        pass &= mae_cut >= 0.2 && medae_cut >= 0.2;
        lines.push(format!(
            "seed {seed}: (a) {:.4}/{:.4} (d) {:.4}/{:.4} min, reduction {:.0}%/{:.0}%",
            a.mae_minutes,
            a.medae_minutes,
            d.mae_minutes,
            d.medae_minutes,
            100.0 * mae_cut,
            100.0 * medae_cut
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(15 * 60);
    verdict(5, "ablation-ordering", pass, &format!("{}; {elapsed:.0?}", lines.join("; ")));
}

#[test]
fn c06_gradient_checks() {
    let mlp = (0..10).map(common::mlp_grad_check).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tcn = 0.0f64;
    for k in 0..10 {
        let cfg = TcnConfig {
            stages: rng.random_range(1..=3),
            layers: rng.random_range(1..=3),
            channels: rng.random_range(2..=5),
            ..TcnConfig::default()
        };
        let (len, dim) = (rng.random_range(2..=14), rng.random_range(1..=4));
        tcn = tcn.max(common::tcn_grad_check(&cfg, len, dim, 60 + k));
    }
    let pass = mlp <= 1e-3 && tcn <= 1e-3;
    verdict(6, "gradient-checks", pass, &format!("max relative error: frame classifier {mlp:.2e}, temporal network {tcn:.2e}"));
}

#[test]
fn c07_weak_supervision_robustness() {
    let (xs, truth, labels) = common::blobs(2000, 0.2, false, 0);
    let flipped = labels.iter().zip(&truth).filter(|(a, b)| a != b).count();
    let (model, _) = train(&[xs.clone()], &[labels], &common::blob_cfg()).unwrap();
    let acc = common::accuracy(&model, &xs, &truth);
    verdict(7, "noisy-label-robustness", acc >= 0.95, &format!("accuracy vs clean labels {acc:.4} with {flipped}/2000 flipped"));
}

#[test]
fn c08_receptive_field() {
    let cfg = TcnConfig::full_scale();
    let model = init_tcn::<f32>(&cfg, 16, 0).unwrap();
    let rf = receptive_field(cfg.layers, cfg.kernel);
    let pass = (cfg.stages, cfg.layers, cfg.kernel) == (4, 10, 3) && rf == 2047 && model.stage_receptive_field() == 2047;
    verdict(8, "receptive-field", pass, &format!("{} layers, kernel {}: {rf} frames per stage", cfg.layers, cfg.kernel));
}

#[test]
fn c09_metrics() {
    let (mae, medae) = mae_medae(&[10.0, 12.0, 20.0], &[11.0, 12.0, 16.0]).unwrap();
    let fixed = (mae - 1.6667).abs() <= 1e-4 && (mae - 5.0 / 3.0).abs() <= 1e-9 && (medae - 1.0).abs() <= 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let mut s = v.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        exact += (median(&v) == Some(oracle)) as usize;
    }
    let pass = fixed && exact == 1000;
    verdict(9, "metrics", pass, &format!("fixed example MAE {mae:.4} MedAE {medae}, {exact}/1000 medians exact"));
}

fn report_files(dir: &Path) -> Vec<Vec<u8>> {
    ["report.csv", "videos.csv", "report.json"]
        .iter()
        .map(|f| std::fs::read(dir.join("eval").join(f)).unwrap())
        .collect()
}

#[test]
fn c10_pipeline_determinism() {
    let cfg = PipelineConfig::parse(
        "seed = 7\ncorpus.videos = 4\nsynth.frames = 300\nframeclf.epochs = 5\nframeclf.samples_per_class = 1000\ntcn.epochs = 3\n",
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let opts = |name: &str| PipelineOptions {
        work_dir: tmp.path().join(name),
        corpus: None,
        restart: false,
    };
    run_pipeline(&cfg, &opts("first")).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    single.install(|| run_pipeline(&cfg, &opts("second"))).unwrap();
    let same = report_files(&tmp.path().join("first")) == report_files(&tmp.path().join("second"));
    verdict(10, "pipeline-determinism", same, "report.csv, videos.csv and report.json byte-identical across runs and thread counts");
}
