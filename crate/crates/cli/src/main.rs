//! `vidphase` command-line interface.
//!
//! Every subcommand prints one JSON line on success. Failures print one JSON
//! line `{"error": {"kind": ..., "message": ...}}` to stderr and exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use vidphase::dataio::{load_signal, store_signal, store_tensor, SignalSeries};
use vidphase::eval::{self, EvalError, EvalReport, PipelineConfig, PipelineOptions};
use vidphase::features::fit_normalizer;
use vidphase::frameclf::{self, Mlp};
use vidphase::tcn::{init_tcn, receptive_field, train_tcn, MsTcn};
use vidphase::transition::{detect_transition, PhaseProbs};

#[derive(Parser)]
#[command(name = "vidphase", version, about = "Two-phase video parsing from motion-derived weak labels")]
struct Cli {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of videos; overrides `corpus.videos`.
        #[arg(long)]
        videos: Option<usize>,
        /// Also write the generator's radial flow fields.
        #[arg(long)]
        with_flow: bool,
    },
    /// Estimate optical flow for a frame directory.
    Flow {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        patch: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Per-pair motion direction measure from a flow directory.
    Motion {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cumulative signal, boundary and weak labels from a direction signal.
    Segment {
        #[arg(long)]
        signal: PathBuf,
        /// Frame count of the video.
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cumsum: PathBuf,
        /// SVG plot of the cumulative signal.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Appearance features of every frame, shape (T, 26).
    Featurize {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Normalizer (2 × 26 tensor) to apply.
        #[arg(long)]
        normalizer: Option<PathBuf>,
    },
    /// Train the frame classifier on `<video>.ptns` features and `<video>.csv` labels.
    TrainFrame {
        #[arg(long)]
        feats: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Normalizer to use instead of fitting one on the features.
        #[arg(long)]
        normalizer: Option<PathBuf>,
    },
    /// Penultimate-layer embeddings of a feature tensor.
    Embed {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        feats: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the temporal network on `<video>.ptns` inputs and `<video>.csv` labels.
    TrainTcn(TrainTcnArgs),
    /// Final-stage probabilities, shape (T, 2).
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal two-phase transition of a probability tensor.
    Detect {
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score `<video>.json` detections against a corpus.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "detections")]
        method: String,
    },
    /// Compare the five methods on a corpus (or a synthetic one in memory).
    Ablate {
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        corpus: Option<PathBuf>,
        /// Render `corpus.videos` videos in memory instead of reading a corpus.
        #[arg(long)]
        synthetic: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage, resuming from matching artifacts.
    Pipeline {
        #[arg(long)]
        out: PathBuf,
        /// Existing corpus to use instead of synthesizing one.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Recompute stages whose artifacts are stale.
        #[arg(long)]
        restart: bool,
    },
}

#[derive(Args)]
struct TrainTcnArgs {
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report_summary(reports: &[EvalReport]) -> Value {
    reports
        .iter()
        .map(|r| json!({ "method": r.method, "mae_minutes": r.mae_minutes, "medae_minutes": r.medae_minutes }))
        .collect()
}

fn run(cli: &Cli) -> Result<Value> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth { out, videos, with_flow } => {
            if let Some(v) = videos {
                cfg.videos = *v;
            }
            let truths = eval::synth_corpus(&cfg, out, *with_flow)?;
            Ok(json!({ "videos": truths.len(), "transition_frames": truths, "out": out }))
        }
        Command::Flow { frames, out, levels, patch, stride } => {
            cfg.flow.levels = levels.unwrap_or(cfg.flow.levels);
            cfg.flow.patch_size = patch.unwrap_or(cfg.flow.patch_size);
            cfg.flow.stride = stride.unwrap_or(cfg.flow.stride);
            let n = eval::flow_dir(frames, out, &cfg.flow)?;
            Ok(json!({ "fields": n, "out": out }))
        }
        Command::Motion { flow, out } => {
            let d = eval::motion_from_flow_dir(flow, &cfg.motion)?;
            ensure_parent(out)?;
            store_signal(&SignalSeries::from_values(d.clone()), out)?;
            Ok(json!({ "pairs": d.len(), "out": out }))
        }
        Command::Segment { signal, frames, out, cumsum, plot } => {
            let s = load_signal(signal)?;
            let seg = eval::segment(&s.values, *frames)?;
            for p in [Some(out), Some(cumsum), plot.as_ref()].into_iter().flatten() {
                ensure_parent(p)?;
            }
            eval::store_segmentation(&seg, out, cumsum, plot.as_deref().map(|p| (p, None)))?;
            Ok(json!({ "boundary_frame": seg.boundary, "labels": out, "cumsum": cumsum }))
        }
        Command::Featurize { frames, out, normalizer } => {
            let mut rows = eval::featurize_dir(frames)?;
            if let Some(n) = normalizer {
                let n = eval::load_normalizer(n)?;
                rows = rows.iter().map(|r| n.apply(r)).collect();
            }
            ensure_parent(out)?;
            store_tensor(&eval::rows_tensor(&rows)?, out)?;
            Ok(json!({ "frames": rows.len(), "dims": rows[0].len(), "out": out }))
        }
        Command::TrainFrame { feats, labels, out, normalizer } => {
            let names = eval::list_stems(labels, "csv")?;
            if names.is_empty() {
                bail!("no <video>.csv label files in {}", labels.display());
            }
            let (xs, ys) = eval::load_labeled_rows(feats, labels, &names)?;
            let norm = match normalizer {
                Some(p) => eval::load_normalizer(p)?,
                None => fit_normalizer(&xs.iter().flatten().collect::<Vec<_>>()),
            };
            let xs: Vec<Vec<Vec<f32>>> = xs.iter().map(|v| v.iter().map(|f| norm.apply(f)).collect()).collect();
            let (model, rep) = frameclf::train(&xs, &ys, &cfg.frameclf_config())?;
            model.save(out)?;
            eval::store_normalizer(&norm, &out.join("normalizer.ptns"))?;
            Ok(json!({
                "videos": names.len(),
                "samples_per_class": rep.samples_per_class,
                "final_loss": rep.final_loss,
                "accuracy_vs_weak_labels": rep.accuracy,
                "out": out,
            }))
        }
        Command::Embed { model, feats, out } => {
            let m = Mlp::<f32>::load(model)?;
            let mut rows = eval::load_rows(feats)?;
            let np = model.join("normalizer.ptns");
            if np.exists() {
                let n = eval::load_normalizer(&np)?;
                rows = rows.iter().map(|r| n.apply(r)).collect();
            }
            let emb = frameclf::embed_sequence(&m, &rows)?;
            ensure_parent(out)?;
            store_tensor(&eval::rows_tensor(&emb)?, out)?;
            Ok(json!({ "frames": emb.len(), "dims": m.embedding_dim(), "out": out }))
        }
        Command::TrainTcn(a) => {
            let names = eval::list_stems(&a.labels, "csv")?;
            if names.is_empty() {
                bail!("no <video>.csv label files in {}", a.labels.display());
            }
            let (xs, ys) = eval::load_labeled_rows(&a.emb, &a.labels, &names)?;
            let mut tcfg = cfg.tcn_config(3);
            tcfg.stages = a.stages.unwrap_or(tcfg.stages);
            tcfg.layers = a.layers.unwrap_or(tcfg.layers);
            tcfg.channels = a.channels.unwrap_or(tcfg.channels);
            tcfg.epochs = a.epochs.unwrap_or(tcfg.epochs);
            let dim = xs[0].first().map(Vec::len).ok_or_else(|| anyhow!("empty input sequence"))?;
            let init = init_tcn::<f32>(&tcfg, dim, tcfg.seed)?;
            let (model, rep) = train_tcn(init, &xs, &ys, &tcfg)?;
            model.save(&a.out)?;
            Ok(json!({
                "videos": names.len(),
                "receptive_field_per_stage": receptive_field(tcfg.layers, tcfg.kernel),
                "epoch_loss": rep.epoch_loss,
                "out": a.out,
            }))
        }
        Command::Infer { model, emb, out } => {
            let m = MsTcn::<f32>::load(model)?;
            let probs = m.infer(&eval::load_rows(emb)?)?;
            ensure_parent(out)?;
            store_tensor(&eval::probs_tensor(&probs)?, out)?;
            Ok(json!({ "frames": probs.len(), "out": out }))
        }
        Command::Detect { probs, fps, out } => {
            let p = eval::load_probs(probs)?;
            let series = PhaseProbs::new(p, fps.unwrap_or(cfg.fps));
            series.validate()?;
            let t = detect_transition(&series)?;
            let text = eval::transition_json(&t);
            write(out, &text)?;
            Ok(serde_json::from_str(&text)?)
        }
        Command::Eval { detections, corpus, out, method } => {
            let mut rows = Vec::new();
            for (name, path) in eval::load_corpus_videos(corpus)? {
                let truth = vidphase::synth::load_truth(&path)?.transition_frame;
                let pred = eval::load_transition_frame(&detections.join(format!("{name}.json")))?;
                rows.push((name, pred, truth));
            }
            let r = EvalReport::from_frames(method, "detections scored against ground truth", &rows, cfg.fps, &cfg.hash(&[]), cfg.seed)?;
            eval::write_reports(out, std::slice::from_ref(&r), &[])?;
            Ok(json!({ "reports": report_summary(&[r]), "out": out }))
        }
        Command::Ablate { corpus, synthetic, out } => {
            let ab = match corpus {
                Some(c) if !*synthetic => eval::run_ablation(c, &cfg)?,
                _ => eval::run_methods(&eval::prepare_synthetic(&cfg)?, &cfg)?,
            };
            eval::write_reports(out, &ab.reports, &eval::REPORT_NOTES)?;
            write(&out.join("config.txt"), &cfg.to_text())?;
            Ok(json!({ "reports": report_summary(&ab.reports), "out": out }))
        }
        Command::Pipeline { out, corpus, restart } => {
            let opts = PipelineOptions {
                work_dir: out.clone(),
                corpus: corpus.clone(),
                restart: *restart,
            };
            let s = eval::run_pipeline(&cfg, &opts)?;
            Ok(json!({
                "ran": s.ran,
                "skipped": s.skipped,
                "reports": report_summary(&s.reports),
                "report_dir": s.report_dir,
            }))
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    use vidphase::dataio::DataIoError;
    let chain = || e.chain();
    for cause in chain() {
        match cause.downcast_ref::<EvalError>() {
            Some(EvalError::Config(_)) => return "config",
            Some(EvalError::StaleArtifact { .. }) => return "stale_artifact",
            Some(EvalError::Corpus { .. }) => return "corpus",
            Some(EvalError::Metrics(_)) => return "metrics",
            Some(EvalError::Io(_)) => return "io",
            Some(EvalError::Data(DataIoError::Io { .. } | DataIoError::Stream(_))) => return "io",
            Some(EvalError::Data(_)) => return "data",
            _ => {}
        }
    }
    for cause in chain() {
        if let Some(err) = cause.downcast_ref::<DataIoError>() {
            return match err {
                DataIoError::Io { .. } | DataIoError::Stream(_) => "io",
                _ => "data",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<vidphase::nn::ModelIoError>() {
            return "model";
        }
    }
    for cause in chain() {
        if let Some(err) = cause.downcast_ref::<EvalError>() {
            return match err {
                EvalError::Synth(_) => "synth",
                EvalError::Flow(_) => "flow",
                EvalError::Motion(_) => "motion",
                EvalError::FrameClf(_) | EvalError::Tcn(_) => "training",
                _ => "transition",
            };
        }
        if cause.is::<vidphase::frameclf::FrameClfError>() || cause.is::<vidphase::tcn::TcnError>() {
            return "training";
        }
        if cause.is::<vidphase::transition::TransitionError>() {
            return "transition";
        }
    }
    "error"
}

/// The error chain joined with `: `, skipping causes already quoted by their parent.
fn error_message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_string(), 2),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("usage", format!("--threads: {e}"), 2);
        }
    }
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_kind(&e), error_message(&e), 1),
    }
}
