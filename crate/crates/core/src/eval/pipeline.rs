//! On-disk pipeline: every stage writes its artifacts in the `dataio`
//! formats plus a `stage.json` marker holding the stage's configuration
//! hash. A rerun skips stages whose marker matches and refuses to build on
//! stages whose marker does not.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::ablation::{load_corpus_videos, motion_track, Method, REPORT_NOTES};
use super::config::hash_strings;
use super::{line_plot_svg, write_reports, EvalError, EvalReport, Marker, PipelineConfig, Result};
use crate::dataio::{load_flow, load_frame, load_signal, load_tensor, store_flow, store_signal, store_tensor, SignalSeries, TensorFile};
use crate::features::{extract_features, fit_normalizer, Normalizer};
use crate::flow::{count_frames, FlowParams, FlowStream};
use crate::frameclf::{self, Mlp};
use crate::motion::{direction_measure, median_filter, weak_labels, MotionParams};
use crate::synth::{load_truth, write_video};
use crate::tcn::{init_tcn, train_tcn, MsTcn};
use crate::transition::{detect_transition, PhaseProbs, Transition};

pub const STAGES: [&str; 10] = [
    "synth", "flow", "motion", "features", "frameclf", "embed", "tcn", "infer", "detect", "eval",
];

const MARKER: &str = "stage.json";

fn io_err(p: &Path, e: std::io::Error) -> EvalError {
    EvalError::Io(format!("{}: {e}", p.display()))
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| io_err(p, e))
}

fn read_text(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| io_err(p, e))
}

/// Writes one video per `video_%03d` directory under `out`.
pub fn synth_corpus(cfg: &PipelineConfig, out: &Path, with_flow: bool) -> Result<Vec<usize>> {
    cfg.validate()?;
    mkdir(out)?;
    (0..cfg.videos)
        .into_par_iter()
        .map(|i| Ok(write_video(&cfg.video_config(i), &out.join(format!("video_{i:03}")), with_flow)?.transition_frame))
        .collect()
}

fn frame_file(dir: &Path, t: usize) -> PathBuf {
    let pgm = dir.join(format!("frame_{t:06}.pgm"));
    if pgm.exists() {
        pgm
    } else {
        dir.join(format!("frame_{t:06}.ppm"))
    }
}

/// Flow of every consecutive pair in `frames`, written as `flow_%06d.flo`.
pub fn flow_dir(frames: &Path, out: &Path, params: &FlowParams) -> Result<usize> {
    let n = count_frames(frames);
    if n < 2 {
        return Err(EvalError::Corpus {
            dir: frames.display().to_string(),
            msg: format!("need at least two frames, found {n}"),
        });
    }
    mkdir(out)?;
    let mut stream = FlowStream::new(params.clone())?;
    for t in 0..n {
        if let Some(f) = stream.push(&load_frame(frame_file(frames, t))?)? {
            store_flow(&f, out.join(format!("flow_{:06}.flo", t - 1)))?;
        }
    }
    Ok(n - 1)
}

/// Median-filtered direction measure of every `flow_%06d.flo` in `dir`.
pub fn motion_from_flow_dir(dir: &Path, params: &MotionParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut n = 0;
    while dir.join(format!("flow_{n:06}.flo")).exists() {
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::Corpus {
            dir: dir.display().to_string(),
            msg: "no flow_%06d.flo files".into(),
        });
    }
    let raw = (0..n)
        .into_par_iter()
        .map(|i| Ok(direction_measure(&load_flow(dir.join(format!("flow_{i:06}.flo")))?, params)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(median_filter(&raw, params.median_width))
}

/// Outputs of the segmentation step.
pub struct Segmentation {
    pub cumulative: Vec<f64>,
    pub boundary: usize,
    pub labels: Vec<u8>,
}

/// Cumulative signal, boundary and weak labels for a `frames`-long video.
pub fn segment(direction: &[f64], frames: usize) -> Result<Segmentation> {
    if direction.len() + 1 != frames {
        return Err(EvalError::Corpus {
            dir: "<signal>".into(),
            msg: format!("{} pair measures do not match {frames} frames", direction.len()),
        });
    }
    let (cumulative, boundary) = motion_track(direction);
    Ok(Segmentation {
        labels: weak_labels(frames, boundary),
        cumulative,
        boundary,
    })
}

/// Writes `labels.csv`, `cumsum.csv` and, when `svg` is given, a plot of S(t).
pub fn store_segmentation(seg: &Segmentation, labels: &Path, cumsum: &Path, svg: Option<(&Path, Option<usize>)>) -> Result<()> {
    store_signal(
        &SignalSeries::from_values(seg.labels.iter().map(|&l| l as f64).collect()),
        labels,
    )?;
    store_signal(&SignalSeries::from_values(seg.cumulative.clone()), cumsum)?;
    if let Some((path, truth)) = svg {
        let mut markers = vec![Marker {
            index: seg.boundary,
            label: "motion boundary",
            color: "#c0392b",
        }];
        if let Some(t) = truth {
            markers.push(Marker {
                index: t,
                label: "ground truth",
                color: "#27ae60",
            });
        }
        write_text(path, &line_plot_svg(&seg.cumulative, "Cumulative motion direction S(t)", "S(t)", &markers))?;
    }
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<Vec<u8>> {
    load_signal(path)?
        .values
        .iter()
        .map(|&v| match v {
            1.0 => Ok(1),
            2.0 => Ok(2),
            _ => Err(EvalError::Corpus {
                dir: path.display().to_string(),
                msg: format!("label {v} is not 1 or 2"),
            }),
        })
        .collect()
}

/// Features of every frame in `frames`, streamed from disk.
pub fn featurize_dir(frames: &Path) -> Result<Vec<Vec<f32>>> {
    let n = count_frames(frames);
    if n == 0 {
        return Err(EvalError::Corpus {
            dir: frames.display().to_string(),
            msg: "no frames".into(),
        });
    }
    let mut prev = None;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let f = load_frame(frame_file(frames, t))?;
        out.push(extract_features(&f, prev.as_ref()).to_vec());
        prev = Some(f);
    }
    Ok(out)
}

pub fn rows_tensor(rows: &[Vec<f32>]) -> Result<TensorFile> {
    let cols = rows.first().map_or(0, Vec::len);
    Ok(TensorFile::from_rows(rows, cols)?)
}

pub fn load_rows(path: &Path) -> Result<Vec<Vec<f32>>> {
    let t = load_tensor(path)?;
    if t.rank() != 2 {
        return Err(EvalError::Corpus {
            dir: path.display().to_string(),
            msg: format!("expected a (T, D) tensor, found dims {:?}", t.dims),
        });
    }
    Ok(t.rows()?)
}

/// Normalizer as a `2 × D` tensor: means, then standard deviations.
pub fn store_normalizer(n: &Normalizer, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f32>> = vec![
        n.mean.iter().map(|&v| v as f32).collect(),
        n.std.iter().map(|&v| v as f32).collect(),
    ];
    Ok(store_tensor(&rows_tensor(&rows)?, path)?)
}

pub fn load_normalizer(path: &Path) -> Result<Normalizer> {
    let rows = load_rows(path)?;
    match rows.as_slice() {
        [m, s] => Ok(Normalizer {
            mean: m.iter().map(|&v| v as f64).collect(),
            std: s.iter().map(|&v| v as f64).collect(),
        }),
        _ => Err(EvalError::Corpus {
            dir: path.display().to_string(),
            msg: "normalizer must have two rows".into(),
        }),
    }
}

/// Final-stage probabilities as a `T × 2` tensor.
pub fn probs_tensor(probs: &[[f64; 2]]) -> Result<TensorFile> {
    let rows: Vec<Vec<f32>> = probs.iter().map(|p| vec![p[0] as f32, p[1] as f32]).collect();
    rows_tensor(&rows)
}

pub fn load_probs(path: &Path) -> Result<Vec<[f64; 2]>> {
    load_rows(path)?
        .iter()
        .map(|r| match r.as_slice() {
            [a, b] => Ok([*a as f64, *b as f64]),
            _ => Err(EvalError::Corpus {
                dir: path.display().to_string(),
                msg: "probabilities must have 2 columns".into(),
            }),
        })
        .collect()
}

pub fn transition_json(t: &Transition<f64>) -> String {
    format!(
        "{}\n",
        serde_json::json!({
            "transition_frame": t.frame,
            "transition_seconds": t.seconds,
            "score": t.score,
        })
    )
}

pub fn load_transition_frame(path: &Path) -> Result<usize> {
    let v: serde_json::Value = serde_json::from_str(&read_text(path)?).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    v["transition_frame"].as_u64().map(|f| f as usize).ok_or_else(|| EvalError::Corpus {
        dir: path.display().to_string(),
        msg: "missing transition_frame".into(),
    })
}

/// Labels of every `<video>.csv` matched with `<video>.ptns` rows.
pub fn load_labeled_rows(rows_dir: &Path, labels_dir: &Path, names: &[String]) -> Result<(Vec<Vec<Vec<f32>>>, Vec<Vec<u8>>)> {
    let mut xs = Vec::with_capacity(names.len());
    let mut ys = Vec::with_capacity(names.len());
    for name in names {
        xs.push(load_rows(&rows_dir.join(format!("{name}.ptns")))?);
        ys.push(load_labels(&labels_dir.join(format!("{name}.csv")))?);
    }
    Ok((xs, ys))
}

/// Sorted stems of `*.<ext>` files in `dir`.
pub fn list_stems(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut out: Vec<String> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .filter_map(|p| Some(p.file_stem()?.to_string_lossy().into_owned()))
        .collect();
    out.sort();
    Ok(out)
}

pub struct PipelineOptions {
    pub work_dir: PathBuf,
    /// Existing corpus to use instead of synthesizing one.
    pub corpus: Option<PathBuf>,
    /// Recompute stale stages instead of failing.
    pub restart: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub ran: Vec<String>,
    pub skipped: Vec<String>,
    pub reports: Vec<EvalReport>,
    pub report_dir: PathBuf,
}

struct Runner<'a> {
    opts: &'a PipelineOptions,
    summary: PipelineSummary,
}

impl Runner<'_> {
    /// Runs `body` into `dir` unless a matching marker is present.
    fn stage(&mut self, name: &str, dir: &Path, hash: &str, body: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let marker = dir.join(MARKER);
        if marker.exists() {
            let v: serde_json::Value = serde_json::from_str(&read_text(&marker)?).unwrap_or_default();
            if v["hash"].as_str() == Some(hash) {
                self.summary.skipped.push(name.to_string());
                return Ok(());
            }
            if !self.opts.restart {
                return Err(EvalError::StaleArtifact {
                    stage: name.to_string(),
                    dir: dir.display().to_string(),
                    hint: format!(
                        "delete {} (and later stages) or rerun with --restart to recompute",
                        dir.display()
                    ),
                });
            }
        }
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        mkdir(dir)?;
        body(dir)?;
        let json = serde_json::json!({ "stage": name, "hash": hash });
        write_text(&marker, &format!("{json}\n"))?;
        self.summary.ran.push(name.to_string());
        Ok(())
    }
}

/// Runs synth → flow → motion → features → frameclf → embed → tcn → infer →
/// detect → eval under `opts.work_dir`.
pub fn run_pipeline(cfg: &PipelineConfig, opts: &PipelineOptions) -> Result<PipelineSummary> {
    cfg.validate()?;
    let work = &opts.work_dir;
    mkdir(work)?;
    write_text(&work.join("config.txt"), &cfg.to_text())?;
    let mut r = Runner {
        opts,
        summary: PipelineSummary {
            ran: Vec::new(),
            skipped: Vec::new(),
            reports: Vec::new(),
            report_dir: work.join("eval"),
        },
    };
    let h = |parts: &[&str]| hash_strings(parts);
    let tcn_method = Method::TcnClassifier;

    let (corpus, h_corpus) = match &opts.corpus {
        Some(dir) => {
            let canon = fs::canonicalize(dir).map_err(|e| io_err(dir, e))?;
            (canon.clone(), h(&["external", &canon.display().to_string()]))
        }
        None => {
            let dir = work.join("corpus");
            let hc = h(&["synth", &cfg.hash(&["seed", "corpus.", "synth."])]);
            r.stage("synth", &dir, &hc, |d| synth_corpus(cfg, d, false).map(|_| ()))?;
            (dir, hc)
        }
    };
    let videos = load_corpus_videos(&corpus)?;
    let names: Vec<String> = videos.iter().map(|v| v.0.clone()).collect();

    let flow = work.join("flow");
    let h_flow = h(&["flow", &h_corpus, &cfg.hash(&["flow."])]);
    r.stage("flow", &flow, &h_flow, |d| {
        videos
            .par_iter()
            .map(|(name, path)| flow_dir(&path.join("frames"), &d.join(name), &cfg.flow).map(|_| ()))
            .collect()
    })?;

    let motion = work.join("motion");
    let labels_dir = motion.join("labels");
    let h_motion = h(&["motion", &h_flow, &cfg.hash(&["motion."])]);
    r.stage("motion", &motion, &h_motion, |d| {
        mkdir(&labels_dir)?;
        videos
            .par_iter()
            .map(|(name, path)| {
                let direction = motion_from_flow_dir(&flow.join(name), &cfg.motion)?;
                let truth = load_truth(path)?;
                let seg = segment(&direction, truth.phases.len())?;
                let vd = d.join(name);
                mkdir(&vd)?;
                store_signal(&SignalSeries::from_values(direction), vd.join("signal.csv"))?;
                store_segmentation(
                    &seg,
                    &labels_dir.join(format!("{name}.csv")),
                    &vd.join("cumsum.csv"),
                    Some((&vd.join("cumsum.svg"), Some(truth.transition_frame))),
                )
            })
            .collect()
    })?;

    let features = work.join("features");
    let h_features = h(&["features", &h_corpus]);
    r.stage("features", &features, &h_features, |d| {
        let rows = videos
            .par_iter()
            .map(|(_, path)| featurize_dir(&path.join("frames")))
            .collect::<Result<Vec<_>>>()?;
        for (name, rows) in names.iter().zip(&rows) {
            store_tensor(&rows_tensor(rows)?, d.join(format!("{name}.ptns")))?;
        }
        let pooled: Vec<&Vec<f32>> = rows.iter().flatten().collect();
        store_normalizer(&fit_normalizer(&pooled), &d.join("normalizer.ptns"))
    })?;

    let clf = work.join("frameclf");
    let h_clf = h(&["frameclf", &h_features, &h_motion, &cfg.hash(&["seed", "frameclf."])]);
    r.stage("frameclf", &clf, &h_clf, |d| {
        let norm = load_normalizer(&features.join("normalizer.ptns"))?;
        let (xs, ys) = load_labeled_rows(&features, &labels_dir, &names)?;
        let xs: Vec<Vec<Vec<f32>>> = xs.iter().map(|v| v.iter().map(|f| norm.apply(f)).collect()).collect();
        let (model, rep) = frameclf::train(&xs, &ys, &cfg.frameclf_config())?;
        model.save(d)?;
        let json = serde_json::json!({
            "epoch_loss": rep.epoch_loss,
            "final_loss": rep.final_loss,
            "accuracy_vs_weak_labels": rep.accuracy,
            "samples_per_class": rep.samples_per_class,
        });
        write_text(&d.join("report.json"), &format!("{json}\n"))
    })?;

    let embed = work.join("embed");
    let h_embed = h(&["embed", &h_clf]);
    r.stage("embed", &embed, &h_embed, |d| {
        let norm = load_normalizer(&features.join("normalizer.ptns"))?;
        let model = Mlp::<f32>::load(&clf)?;
        names
            .par_iter()
            .map(|name| {
                let rows: Vec<Vec<f32>> = load_rows(&features.join(format!("{name}.ptns")))?
                    .iter()
                    .map(|f| norm.apply(f))
                    .collect();
                let emb = frameclf::embed_sequence(&model, &rows)?;
                store_tensor(&rows_tensor(&emb)?, d.join(format!("{name}.ptns")))?;
                Ok(())
            })
            .collect()
    })?;

    let tcn = work.join("tcn");
    let h_tcn = h(&["tcn", &h_embed, &h_motion, &cfg.hash(&["seed", "tcn."])]);
    r.stage("tcn", &tcn, &h_tcn, |d| {
        let (xs, ys) = load_labeled_rows(&embed, &labels_dir, &names)?;
        let tcfg = cfg.tcn_config(3);
        let init = init_tcn::<f32>(&tcfg, xs[0][0].len(), tcfg.seed)?;
        let (model, rep) = train_tcn(init, &xs, &ys, &tcfg)?;
        model.save(d)?;
        write_text(&d.join("report.json"), &format!("{}\n", serde_json::json!({ "epoch_loss": rep.epoch_loss })))
    })?;

    let infer = work.join("infer");
    let h_infer = h(&["infer", &h_tcn]);
    r.stage("infer", &infer, &h_infer, |d| {
        let model = MsTcn::<f32>::load(&tcn)?;
        names
            .par_iter()
            .map(|name| {
                let probs = model.infer(&load_rows(&embed.join(format!("{name}.ptns")))?)?;
                store_tensor(&probs_tensor(&probs)?, d.join(format!("{name}.ptns")))?;
                Ok(())
            })
            .collect()
    })?;

    let detect = work.join("detect");
    let fps = format!("{:?}", cfg.fps);
    let h_detect = h(&["detect", &h_infer, &fps]);
    r.stage("detect", &detect, &h_detect, |d| {
        for name in &names {
            let probs = load_probs(&infer.join(format!("{name}.ptns")))?;
            let t = detect_transition(&PhaseProbs::new(probs, cfg.fps))?;
            write_text(&d.join(format!("{name}.json")), &transition_json(&t))?;
        }
        Ok(())
    })?;

    let eval = work.join("eval");
    let h_eval = h(&["eval", &h_detect, &h_motion, &h_corpus, &fps, &cfg.hash(&[])]);
    let mut reports = Vec::new();
    r.stage("eval", &eval, &h_eval, |d| {
        let (mut base, mut ours) = (Vec::new(), Vec::new());
        for (name, path) in &videos {
            let truth = load_truth(path)?.transition_frame;
            let labels = load_labels(&labels_dir.join(format!("{name}.csv")))?;
            let b = labels.iter().filter(|&&l| l == 1).count();
            base.push((name.clone(), b, truth));
            ours.push((name.clone(), load_transition_frame(&detect.join(format!("{name}.json")))?, truth));
        }
        let hash = cfg.hash(&[]);
        let m = Method::MotionBaseline;
        reports.push(EvalReport::from_frames(m.id(), m.description(), &base, cfg.fps, &hash, cfg.seed)?);
        reports.push(EvalReport::from_frames(tcn_method.id(), tcn_method.description(), &ours, cfg.fps, &hash, cfg.seed)?);
        write_reports(d, &reports, &REPORT_NOTES[..1])
    })?;
    if reports.is_empty() {
        let v: serde_json::Value = serde_json::from_str(&read_text(&eval.join("report.json"))?)
            .map_err(|e| EvalError::Io(e.to_string()))?;
        reports = serde_json::from_value(v["reports"].clone()).map_err(|e| EvalError::Io(e.to_string()))?;
    }
    r.summary.reports = reports;
    Ok(r.summary)
}
