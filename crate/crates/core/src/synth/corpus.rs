use std::fs;
use std::path::Path;

use crate::dataio::{store_flow, store_frame, DataIoError};

use super::{make_schedule, synth_flow_fields, FrameRenderer, GroundTruth, Result, SynthConfig, SynthError};

/// Seed of video `index` in a corpus generated from `base`.
pub fn video_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| DataIoError::io(p, e).into())
}

/// Writes `truth.csv` (`frame,phase,velocity`) and `truth.json`.
pub fn store_truth(truth: &GroundTruth, dir: &Path) -> Result<()> {
    let mut csv = String::from("frame,phase,velocity\n");
    for (t, (p, v)) in truth.phases.iter().zip(&truth.velocity).enumerate() {
        csv.push_str(&format!("{t},{p},{v}\n"));
    }
    let csv_path = dir.join("truth.csv");
    fs::write(&csv_path, csv).map_err(|e| DataIoError::io(&csv_path, e))?;
    let json = serde_json::json!({ "transition_frame": truth.transition_frame });
    let json_path = dir.join("truth.json");
    fs::write(&json_path, format!("{json}\n")).map_err(|e| DataIoError::io(&json_path, e))?;
    Ok(())
}

pub fn load_truth(dir: &Path) -> Result<GroundTruth> {
    let csv_path = dir.join("truth.csv");
    let text = fs::read_to_string(&csv_path).map_err(|e| DataIoError::io(&csv_path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("frame,phase,velocity") {
        return Err(SynthError::Truth(format!("{}: bad header", csv_path.display())));
    }
    let (mut phases, mut velocity) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let parsed = match cells.as_slice() {
            [f, p, v] => f
                .parse::<usize>()
                .ok()
                .filter(|&f| f == k)
                .and(p.parse::<u8>().ok().filter(|p| *p == 1 || *p == 2))
                .zip(v.parse::<f64>().ok()),
            _ => None,
        };
        let (p, v) = parsed.ok_or_else(|| SynthError::Truth(format!("line {}: {line:?}", k + 2)))?;
        phases.push(p);
        velocity.push(v);
    }
    let json_path = dir.join("truth.json");
    let json = fs::read_to_string(&json_path).map_err(|e| DataIoError::io(&json_path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&json).map_err(|e| SynthError::Truth(e.to_string()))?;
    let transition_frame = value["transition_frame"]
        .as_u64()
        .ok_or_else(|| SynthError::Truth("truth.json lacks transition_frame".into()))?
        as usize;
    let consistent = phases.iter().enumerate().all(|(t, &p)| (p == 1) == (t < transition_frame));
    if !consistent {
        return Err(SynthError::Truth(
            "phases disagree with transition_frame".into(),
        ));
    }
    Ok(GroundTruth {
        transition_frame,
        phases,
        velocity,
    })
}

/// Generates one video into `dir`: `frames/frame_%06d.pgm`, optionally
/// `flow/flow_%06d.flo` from the direct radial-field generator, and truth files.
pub fn write_video(config: &SynthConfig, dir: &Path, with_flow: bool) -> Result<GroundTruth> {
    let (schedule, truth) = make_schedule(config)?;
    let frames_dir = dir.join("frames");
    mkdir(&frames_dir)?;
    for (t, frame) in FrameRenderer::new(&schedule, config)?.enumerate() {
        store_frame(&frame, frames_dir.join(format!("frame_{t:06}.pgm")))?;
    }
    if with_flow {
        let flow_dir = dir.join("flow");
        mkdir(&flow_dir)?;
        for (i, f) in synth_flow_fields(&schedule, config)?.iter().enumerate() {
            store_flow(f, flow_dir.join(format!("flow_{i:06}.flo")))?;
        }
    }
    store_truth(&truth, dir)?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_roundtrip_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = SynthConfig { total_frames: 100, ..Default::default() };
        let truth = write_video(&c, dir.path(), true).unwrap();
        assert_eq!(load_truth(dir.path()).unwrap(), truth);
        assert!(dir.path().join("frames/frame_000099.pgm").exists());
        assert!(dir.path().join("flow/flow_000098.flo").exists());
        assert!(!dir.path().join("flow/flow_000099.flo").exists());
        let json = fs::read_to_string(dir.path().join("truth.json")).unwrap();
        assert_eq!(json.trim(), r#"{"transition_frame":40}"#);
    }

    #[test]
    fn byte_identical_regeneration() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let c = SynthConfig { total_frames: 100, seed: 7, ..Default::default() };
        write_video(&c, a.path(), false).unwrap();
        write_video(&c, b.path(), false).unwrap();
        for name in ["frames/frame_000000.pgm", "frames/frame_000057.pgm", "truth.csv"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn seeds_differ_per_video() {
        assert_ne!(video_seed(0, 0), video_seed(0, 1));
        assert_ne!(video_seed(0, 0), video_seed(1, 0));
    }
}
