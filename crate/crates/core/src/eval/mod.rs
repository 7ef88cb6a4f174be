//! Metrics, the method ablation, configuration and pipeline orchestration.

mod ablation;
mod config;
mod pipeline;
mod plot;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{
    load_corpus_videos, motion_track, prepare_corpus, prepare_synthetic, prepare_video, run_ablation, run_methods,
    detect_frames, motion_per_frame, normalize_features, Ablation, Method, MethodInputs, VideoData, REPORT_NOTES,
};
pub use config::PipelineConfig;
pub use pipeline::{
    featurize_dir, flow_dir, list_stems, load_labeled_rows, load_labels, load_normalizer, load_probs, load_rows,
    load_transition_frame, motion_from_flow_dir, probs_tensor, rows_tensor, run_pipeline, segment, store_normalizer,
    store_segmentation, synth_corpus, transition_json, PipelineOptions, PipelineSummary, Segmentation, STAGES,
};
pub use plot::{line_plot_svg, Marker};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("corpus {dir}: {msg}")]
    Corpus { dir: String, msg: String },
    #[error("stale artifact in {dir}: stage `{stage}` was produced with a different configuration; {hint}")]
    StaleArtifact { stage: String, dir: String, hint: String },
    #[error("metrics: {0}")]
    Metrics(String),
    #[error(transparent)]
    Data(#[from] crate::dataio::DataIoError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Flow(#[from] crate::flow::FlowError),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
    #[error(transparent)]
    FrameClf(#[from] crate::frameclf::FrameClfError),
    #[error(transparent)]
    Tcn(#[from] crate::tcn::TcnError),
    #[error(transparent)]
    Transition(#[from] crate::transition::TransitionError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Median of `v`; the mean of the two middle values for even lengths.
pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// Mean and median absolute error between predictions and ground truth.
pub fn mae_medae(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(EvalError::Metrics(format!(
            "need equally many predictions and truths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let err: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    let mae = err.iter().sum::<f64>() / err.len() as f64;
    Ok((mae, median(&err).unwrap_or(0.0)))
}

pub fn frames_to_minutes(frame: usize, fps: f64) -> f64 {
    frame as f64 / fps / 60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoResult {
    pub video: String,
    pub predicted_frame: usize,
    pub truth_frame: usize,
    pub predicted_minutes: f64,
    pub truth_minutes: f64,
    pub abs_error_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub description: String,
    pub videos: Vec<VideoResult>,
    pub mae_minutes: f64,
    pub medae_minutes: f64,
    pub config_hash: String,
    pub seed: u64,
}

impl EvalReport {
    /// Builds a report from `(video, predicted frame, truth frame)` triples.
    pub fn from_frames(
        method: &str,
        description: &str,
        results: &[(String, usize, usize)],
        fps: f64,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self> {
        let videos: Vec<VideoResult> = results
            .iter()
            .map(|(v, p, t)| {
                let (pm, tm) = (frames_to_minutes(*p, fps), frames_to_minutes(*t, fps));
                VideoResult {
                    video: v.clone(),
                    predicted_frame: *p,
                    truth_frame: *t,
                    predicted_minutes: pm,
                    truth_minutes: tm,
                    abs_error_minutes: (pm - tm).abs(),
                }
            })
            .collect();
        let pred: Vec<f64> = videos.iter().map(|r| r.predicted_minutes).collect();
        let truth: Vec<f64> = videos.iter().map(|r| r.truth_minutes).collect();
        let (mae, medae) = mae_medae(&pred, &truth)?;
        Ok(Self {
            method: method.to_string(),
            description: description.to_string(),
            videos,
            mae_minutes: mae,
            medae_minutes: medae,
            config_hash: config_hash.to_string(),
            seed,
        })
    }
}

/// Summary table, one row per method.
pub fn summary_csv(reports: &[EvalReport], notes: &[&str]) -> String {
    let mut out = String::new();
    for n in notes {
        let _ = writeln!(out, "# {n}");
    }
    out.push_str("method,description,videos,mae_minutes,medae_minutes,config_hash,seed\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.description,
            r.videos.len(),
            r.mae_minutes,
            r.medae_minutes,
            r.config_hash,
            r.seed
        );
    }
    out
}

/// Per-video rows of every method.
pub fn videos_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,video,predicted_frame,truth_frame,predicted_minutes,truth_minutes,abs_error_minutes\n");
    for r in reports {
        for v in &r.videos {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method, v.video, v.predicted_frame, v.truth_frame, v.predicted_minutes, v.truth_minutes, v.abs_error_minutes
            );
        }
    }
    out
}

/// Writes `report.csv`, `videos.csv` and `report.json` into `dir`.
pub fn write_reports(dir: &Path, reports: &[EvalReport], notes: &[&str]) -> Result<()> {
    let io = |p: &Path, e: std::io::Error| EvalError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let json = serde_json::json!({ "notes": notes, "reports": reports });
    let files = [
        ("report.csv", summary_csv(reports, notes)),
        ("videos.csv", videos_csv(reports)),
        ("report.json", format!("{}\n", serde_json::to_string_pretty(&json).unwrap_or_default())),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| io(&p, e))?;
    }
    Ok(())
}
