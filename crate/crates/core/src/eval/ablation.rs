//! The five-method comparison: the motion boundary alone and the temporal
//! network over four input representations, all trained on the same weak
//! labels.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{EvalError, EvalReport, PipelineConfig, Result};
use crate::dataio::{load_frame, FrameImage};
use crate::features::{extract_features, fit_normalizer, FeatureVector, Normalizer};
use crate::flow::{count_frames, FlowStream};
use crate::frameclf::{self, Mlp, TrainReport};
use crate::motion::{boundary_estimate, cumulative_signal, direction_measure, median_filter, weak_labels};
use crate::synth::{load_truth, make_schedule, FrameRenderer};
use crate::tcn::{infer_many, init_tcn, train_tcn, MsTcn, TcnReport};
use crate::transition::{detect_transition, PhaseProbs};

/// What one video contributes: its truth and the two frame-level signals.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoData {
    pub name: String,
    pub truth_frame: usize,
    /// Direction measure per consecutive frame pair, after median filtering.
    pub direction: Vec<f64>,
    pub features: Vec<FeatureVector>,
}

impl VideoData {
    pub fn frames(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MotionBaseline,
    TcnMotion,
    TcnRawFeatures,
    TcnClassifier,
    TcnClassifierMotion,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MotionBaseline,
        Method::TcnMotion,
        Method::TcnRawFeatures,
        Method::TcnClassifier,
        Method::TcnClassifierMotion,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::MotionBaseline => "a-motion-baseline",
            Method::TcnMotion => "b-tcn-motion",
            Method::TcnRawFeatures => "c-tcn-raw-features",
            Method::TcnClassifier => "d-tcn-classifier",
            Method::TcnClassifierMotion => "e-tcn-classifier-motion",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Method::MotionBaseline => "cumulative motion direction argmax",
            Method::TcnMotion => "TCN on the motion direction signal",
            Method::TcnRawFeatures => "TCN on raw normalized appearance features (generic-feature surrogate)",
            Method::TcnClassifier => "TCN on frame-classifier embeddings",
            Method::TcnClassifierMotion => "TCN on classifier embeddings plus motion direction",
        }
    }

    fn index(self) -> usize {
        Method::ALL.iter().position(|&m| m == self).unwrap_or(0)
    }
}

pub const REPORT_NOTES: [&str; 2] = [
    "errors in minutes; every method is trained only on the motion-derived weak labels",
    "method c feeds raw normalized hand-crafted features as a stand-in for generic pretrained features",
];

/// Prefix sums of the direction series and their argmax (first withdrawal frame).
pub fn motion_track(direction: &[f64]) -> (Vec<f64>, usize) {
    let s = cumulative_signal(direction);
    let b = boundary_estimate(&s);
    (s, b)
}

/// Consumes a frame stream once, producing the direction series and the
/// appearance features without keeping frames or flow fields.
pub fn prepare_video<I>(name: String, truth_frame: usize, frames: I, cfg: &PipelineConfig) -> Result<VideoData>
where
    I: IntoIterator<Item = Result<FrameImage>>,
{
    let mut stream = FlowStream::new(cfg.flow.clone())?;
    let mut prev: Option<FrameImage> = None;
    let (mut raw, mut features) = (Vec::new(), Vec::new());
    for frame in frames {
        let frame = frame?;
        features.push(extract_features(&frame, prev.as_ref()));
        if let Some(field) = stream.push(&frame)? {
            raw.push(direction_measure(&field, &cfg.motion)?);
        }
        prev = Some(frame);
    }
    if features.len() < 2 {
        return Err(EvalError::Corpus {
            dir: name,
            msg: "need at least two frames".into(),
        });
    }
    Ok(VideoData {
        name,
        truth_frame,
        direction: median_filter(&raw, cfg.motion.median_width),
        features,
    })
}

/// Renders `cfg.videos` videos in memory, in parallel.
pub fn prepare_synthetic(cfg: &PipelineConfig) -> Result<Vec<VideoData>> {
    cfg.validate()?;
    (0..cfg.videos)
        .into_par_iter()
        .map(|i| {
            let sc = cfg.video_config(i);
            let (schedule, truth) = make_schedule(&sc)?;
            let frames = FrameRenderer::new(&schedule, &sc)?.map(Ok);
            prepare_video(format!("video_{i:03}"), truth.transition_frame, frames, cfg)
        })
        .collect()
}

/// Sorted `(name, dir)` of the corpus subdirectories holding `truth.json`.
pub fn load_corpus_videos(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| EvalError::Corpus {
        dir: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut out: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("truth.json").is_file())
        .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(EvalError::Corpus {
            dir: dir.display().to_string(),
            msg: "no video directories with ground truth".into(),
        });
    }
    Ok(out)
}

/// Reads every video of an on-disk corpus (`<video>/frames/frame_%06d.pgm`).
pub fn prepare_corpus(dir: &Path, cfg: &PipelineConfig) -> Result<Vec<VideoData>> {
    cfg.validate()?;
    load_corpus_videos(dir)?
        .into_par_iter()
        .map(|(name, path)| {
            let truth = load_truth(&path)?;
            let frames_dir = path.join("frames");
            let n = count_frames(&frames_dir);
            if n != truth.phases.len() {
                return Err(EvalError::Corpus {
                    dir: path.display().to_string(),
                    msg: format!("{n} frames but {} truth rows", truth.phases.len()),
                });
            }
            let frames = (0..n).map(|t| Ok(load_frame(frames_dir.join(format!("frame_{t:06}.pgm")))?));
            prepare_video(name, truth.transition_frame, frames, cfg)
        })
        .collect()
}

/// Per-frame motion input: pair `t → t+1` assigned to frame `t`, 0 for the last frame.
pub fn motion_per_frame(direction: &[f64]) -> Vec<f32> {
    let mut m: Vec<f32> = direction.iter().map(|&d| d as f32).collect();
    m.push(0.0);
    m
}

/// The inputs each temporal method sees, per video and frame.
pub struct MethodInputs {
    pub features: Vec<Vec<Vec<f32>>>,
    pub embeddings: Vec<Vec<Vec<f32>>>,
    pub motion: Vec<Vec<f32>>,
}

impl MethodInputs {
    pub fn sequences(&self, method: Method) -> Vec<Vec<Vec<f32>>> {
        let join = |a: &[Vec<f32>], m: &[f32]| -> Vec<Vec<f32>> {
            a.iter()
                .zip(m)
                .map(|(row, &x)| {
                    let mut r = row.clone();
                    r.push(x);
                    r
                })
                .collect()
        };
        match method {
            Method::MotionBaseline | Method::TcnMotion => {
                self.motion.iter().map(|m| m.iter().map(|&x| vec![x]).collect()).collect()
            }
            Method::TcnRawFeatures => self.features.clone(),
            Method::TcnClassifier => self.embeddings.clone(),
            Method::TcnClassifierMotion => self
                .embeddings
                .iter()
                .zip(&self.motion)
                .map(|(e, m)| join(e, m))
                .collect(),
        }
    }
}

/// Everything produced by one ablation run.
pub struct Ablation {
    pub reports: Vec<EvalReport>,
    pub weak_boundaries: Vec<usize>,
    pub normalizer: Normalizer,
    pub classifier: Mlp<f32>,
    pub classifier_report: TrainReport,
    pub inputs: MethodInputs,
    /// Trained temporal network per method `b..e`.
    pub tcn: Vec<(Method, MsTcn<f32>, TcnReport)>,
}

/// Normalized features for every video.
pub fn normalize_features(videos: &[VideoData]) -> (Normalizer, Vec<Vec<Vec<f32>>>) {
    let pooled: Vec<&[f32]> = videos.iter().flat_map(|v| v.features.iter().map(|f| &f[..])).collect();
    let norm = fit_normalizer(&pooled);
    let out = videos
        .iter()
        .map(|v| v.features.iter().map(|f| norm.apply(f)).collect())
        .collect();
    (norm, out)
}

/// Scales the per-frame motion input to unit pooled std.
fn normalize_motion(videos: &[VideoData]) -> Vec<Vec<f32>> {
    let raw: Vec<Vec<f32>> = videos.iter().map(|v| motion_per_frame(&v.direction)).collect();
    let pooled: Vec<[f32; 1]> = raw.iter().flatten().map(|&x| [x]).collect();
    let n = fit_normalizer(&pooled);
    raw.iter().map(|m| m.iter().map(|&x| n.apply(&[x])[0]).collect()).collect()
}

/// Transition frame detected on each probability sequence.
pub fn detect_frames(probs: &[Vec<[f64; 2]>], fps: f64) -> Result<Vec<usize>> {
    probs
        .iter()
        .map(|p| Ok(detect_transition(&PhaseProbs::new(p.clone(), fps))?.frame))
        .collect()
}

/// Runs all five methods on prepared videos.
pub fn run_methods(videos: &[VideoData], cfg: &PipelineConfig) -> Result<Ablation> {
    cfg.validate()?;
    if videos.is_empty() {
        return Err(EvalError::Corpus {
            dir: "<memory>".into(),
            msg: "no videos".into(),
        });
    }
    let hash = cfg.hash(&[]);
    let truth: Vec<(String, usize)> = videos.iter().map(|v| (v.name.clone(), v.truth_frame)).collect();
    let report = |m: Method, pred: &[usize]| {
        let rows: Vec<(String, usize, usize)> = truth.iter().zip(pred).map(|((n, t), &p)| (n.clone(), p, *t)).collect();
        EvalReport::from_frames(m.id(), m.description(), &rows, cfg.fps, &hash, cfg.seed)
    };

    let weak_boundaries: Vec<usize> = videos.iter().map(|v| motion_track(&v.direction).1).collect();
    let labels: Vec<Vec<u8>> = videos
        .iter()
        .zip(&weak_boundaries)
        .map(|(v, &b)| weak_labels(v.frames(), b))
        .collect();
    let mut reports = vec![report(Method::MotionBaseline, &weak_boundaries)?];

    let (normalizer, features) = normalize_features(videos);
    let (classifier, classifier_report) = frameclf::train(&features, &labels, &cfg.frameclf_config())?;
    let embeddings = features
        .iter()
        .map(|f| frameclf::embed_sequence(&classifier, f))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let inputs = MethodInputs {
        features,
        embeddings,
        motion: normalize_motion(videos),
    };

    let mut tcn = Vec::new();
    for method in &Method::ALL[1..] {
        let seqs = inputs.sequences(*method);
        let tcfg = cfg.tcn_config(method.index());
        let init = init_tcn::<f32>(&tcfg, seqs[0][0].len(), tcfg.seed)?;
        let (model, rep) = train_tcn(init, &seqs, &labels, &tcfg)?;
        let probs = infer_many(&model, &seqs)?;
        reports.push(report(*method, &detect_frames(&probs, cfg.fps)?)?);
        tcn.push((*method, model, rep));
    }
    Ok(Ablation {
        reports,
        weak_boundaries,
        normalizer,
        classifier,
        classifier_report,
        inputs,
        tcn,
    })
}

/// Ablation over an on-disk corpus.
pub fn run_ablation(corpus: &Path, cfg: &PipelineConfig) -> Result<Ablation> {
    let videos = prepare_corpus(corpus, cfg)?;
    run_methods(&videos, cfg)
}
