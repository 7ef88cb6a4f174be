//! Flat `key = value` pipeline configuration.
//!
//! Keys are dotted (`flow.levels`, `synth.withdrawal.velocity_mean`), `#`
//! starts a comment, unknown keys and ill-typed values are errors. Every key
//! has a default, so an empty file is a valid configuration.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{EvalError, Result};
use crate::flow::FlowParams;
use crate::frameclf::TrainConfig;
use crate::motion::MotionParams;
use crate::synth::{PhaseAppearance, PhaseMotion, SynthConfig};
use crate::tcn::TcnConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Frame rate used to report errors in minutes.
    pub fps: f64,
    pub videos: usize,
    pub synth: SynthConfig,
    pub flow: FlowParams,
    pub motion: MotionParams,
    pub frameclf: TrainConfig,
    pub tcn: TcnConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            fps: 30.0,
            videos: 50,
            synth: SynthConfig::default(),
            flow: FlowParams::default(),
            motion: MotionParams::default(),
            frameclf: TrainConfig::default(),
            tcn: TcnConfig::default(),
        }
    }
}

enum Slot<'a> {
    F64(&'a mut f64),
    F32(&'a mut f32),
    Usize(&'a mut usize),
    U64(&'a mut u64),
}

impl Slot<'_> {
    fn set(&mut self, raw: &str) -> std::result::Result<(), String> {
        let bad = |ty: &str| format!("expected {ty}, found {raw:?}");
        match self {
            Slot::F64(v) => **v = raw.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| bad("a finite real"))?,
            Slot::F32(v) => **v = raw.parse().ok().filter(|x: &f32| x.is_finite()).ok_or_else(|| bad("a finite real"))?,
            Slot::Usize(v) => **v = raw.parse().map_err(|_| bad("a non-negative integer"))?,
            Slot::U64(v) => **v = raw.parse().map_err(|_| bad("a non-negative integer"))?,
        }
        Ok(())
    }

    fn show(&self) -> String {
        match self {
            Slot::F64(v) => format!("{:?}", **v),
            Slot::F32(v) => format!("{:?}", **v),
            Slot::Usize(v) => v.to_string(),
            Slot::U64(v) => v.to_string(),
        }
    }
}

fn motion_slots<'a>(prefix: &str, m: &'a mut PhaseMotion, out: &mut Vec<(String, Slot<'a>)>) {
    out.push((format!("{prefix}.velocity_mean"), Slot::F64(&mut m.velocity_mean)));
    out.push((format!("{prefix}.velocity_jitter"), Slot::F64(&mut m.velocity_jitter)));
    out.push((format!("{prefix}.pause_prob"), Slot::F64(&mut m.pause_prob)));
    out.push((format!("{prefix}.slip_prob"), Slot::F64(&mut m.slip_prob)));
}

fn look_slots<'a>(prefix: &str, a: &'a mut PhaseAppearance, out: &mut Vec<(String, Slot<'a>)>) {
    out.push((format!("{prefix}.brightness"), Slot::F64(&mut a.brightness)));
    out.push((format!("{prefix}.lumen_radius"), Slot::F64(&mut a.lumen_radius)));
    out.push((format!("{prefix}.texture_scale"), Slot::F64(&mut a.texture_scale)));
    out.push((format!("{prefix}.wall_contact_prob"), Slot::F64(&mut a.wall_contact_prob)));
}

impl PipelineConfig {
    /// Every configurable value, in canonical order.
    fn slots(&mut self) -> Vec<(String, Slot<'_>)> {
        let mut v: Vec<(String, Slot<'_>)> = vec![
            ("seed".into(), Slot::U64(&mut self.seed)),
            ("fps".into(), Slot::F64(&mut self.fps)),
            ("corpus.videos".into(), Slot::Usize(&mut self.videos)),
        ];
        let s = &mut self.synth;
        v.push(("synth.width".into(), Slot::Usize(&mut s.width)));
        v.push(("synth.height".into(), Slot::Usize(&mut s.height)));
        v.push(("synth.frames".into(), Slot::Usize(&mut s.total_frames)));
        v.push(("synth.transition_fraction".into(), Slot::F64(&mut s.transition_fraction)));
        motion_slots("synth.intubation", &mut s.intubation, &mut v);
        motion_slots("synth.withdrawal", &mut s.withdrawal, &mut v);
        look_slots("synth.intubation_look", &mut s.intubation_look, &mut v);
        look_slots("synth.withdrawal_look", &mut s.withdrawal_look, &mut v);
        v.push(("synth.zoom_radius".into(), Slot::F64(&mut s.zoom_radius)));
        v.push(("synth.foe_jitter".into(), Slot::F64(&mut s.foe_jitter)));
        v.push(("synth.flow_noise_sigma".into(), Slot::F64(&mut s.flow_noise_sigma)));
        v.push(("synth.outlier_fraction".into(), Slot::F64(&mut s.outlier_fraction)));
        v.push(("synth.motion_noise_sigma".into(), Slot::F64(&mut s.motion_noise_sigma)));
        v.push(("synth.motion_noise_corr".into(), Slot::F64(&mut s.motion_noise_corr)));
        v.push(("synth.brightness_jitter".into(), Slot::F64(&mut s.brightness_jitter)));
        v.push(("synth.lumen_jitter".into(), Slot::F64(&mut s.lumen_jitter)));
        v.push(("synth.sensor_noise".into(), Slot::F64(&mut s.sensor_noise)));
        let f = &mut self.flow;
        v.push(("flow.levels".into(), Slot::Usize(&mut f.levels)));
        v.push(("flow.patch".into(), Slot::Usize(&mut f.patch_size)));
        v.push(("flow.stride".into(), Slot::Usize(&mut f.stride)));
        v.push(("flow.iterations".into(), Slot::Usize(&mut f.iterations)));
        v.push(("flow.min_update".into(), Slot::F32(&mut f.min_update)));
        v.push(("flow.temperature".into(), Slot::F32(&mut f.temperature)));
        let m = &mut self.motion;
        v.push(("motion.region_fraction".into(), Slot::F64(&mut m.region_fraction)));
        v.push(("motion.median_width".into(), Slot::Usize(&mut m.median_width)));
        let c = &mut self.frameclf;
        v.push(("frameclf.lr".into(), Slot::F64(&mut c.learning_rate)));
        v.push(("frameclf.momentum".into(), Slot::F64(&mut c.momentum)));
        v.push(("frameclf.batch".into(), Slot::Usize(&mut c.batch_size)));
        v.push(("frameclf.epochs".into(), Slot::Usize(&mut c.epochs)));
        v.push(("frameclf.samples_per_class".into(), Slot::Usize(&mut c.samples_per_class)));
        let t = &mut self.tcn;
        v.push(("tcn.stages".into(), Slot::Usize(&mut t.stages)));
        v.push(("tcn.layers".into(), Slot::Usize(&mut t.layers)));
        v.push(("tcn.channels".into(), Slot::Usize(&mut t.channels)));
        v.push(("tcn.kernel".into(), Slot::Usize(&mut t.kernel)));
        v.push(("tcn.lambda".into(), Slot::F64(&mut t.lambda)));
        v.push(("tcn.tau".into(), Slot::F64(&mut t.tau)));
        v.push(("tcn.lr".into(), Slot::F64(&mut t.learning_rate)));
        v.push(("tcn.epochs".into(), Slot::Usize(&mut t.epochs)));
        v
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let hidden = key == "frameclf.hidden";
        if hidden {
            // comma-separated widths; empty means logistic regression
            let widths = value
                .split(',')
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(|w| w.parse::<usize>().ok().filter(|&w| w > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| EvalError::Config(format!("`{key}`: expected comma-separated widths, found {value:?}")))?;
            self.frameclf.hidden = widths;
            return Ok(());
        }
        let mut slots = self.slots();
        let slot = slots
            .iter_mut()
            .find(|(k, _)| k == key)
            .ok_or_else(|| EvalError::Config(format!("unknown key `{key}`")))?;
        slot.1.set(value).map_err(|m| EvalError::Config(format!("`{key}`: {m}")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| EvalError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| match e {
                EvalError::Config(m) => EvalError::Config(format!("line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            EvalError::Config(m) => EvalError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: String| EvalError::Config(e);
        self.synth.validate().map_err(|e| cfg(e.to_string()))?;
        self.flow.validate().map_err(|e| cfg(e.to_string()))?;
        self.motion.validate().map_err(|e| cfg(e.to_string()))?;
        self.frameclf.validate().map_err(|e| cfg(e.to_string()))?;
        self.tcn.validate().map_err(|e| cfg(e.to_string()))?;
        if !(self.fps > 0.0) {
            return Err(cfg("fps must be positive".into()));
        }
        if self.videos == 0 {
            return Err(cfg("corpus.videos must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` listing of every setting.
    pub fn to_text(&self) -> String {
        let mut me = self.clone();
        let hidden: Vec<String> = self.frameclf.hidden.iter().map(|w| w.to_string()).collect();
        let mut out = String::new();
        for (k, s) in me.slots() {
            let _ = writeln!(out, "{k} = {}", s.show());
            if k == "frameclf.lr" {
                let _ = writeln!(out, "frameclf.hidden = {}", hidden.join(","));
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical listing of the keys whose names start
    /// with one of `prefixes` (all keys when empty).
    pub fn hash(&self, prefixes: &[&str]) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| prefixes.is_empty() || prefixes.iter().any(|p| l.starts_with(p)))
            .map(|l| format!("{l}\n"))
            .collect();
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Synthesis settings for video `index`.
    pub fn video_config(&self, index: usize) -> SynthConfig {
        SynthConfig {
            seed: crate::synth::video_seed(self.seed, index),
            ..self.synth.clone()
        }
    }

    pub fn frameclf_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(1),
            ..self.frameclf.clone()
        }
    }

    pub fn tcn_config(&self, method: usize) -> TcnConfig {
        TcnConfig {
            seed: self.seed.wrapping_add(100 + method as u64),
            ..self.tcn.clone()
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn hash_strings(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex(&h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_and_comments() {
        let c = PipelineConfig::parse(
            "# desk run\nseed = 3\nflow.levels = 2   # coarse\n\ntcn.lambda=0.2\nsynth.withdrawal.velocity_mean = -0.5\nframeclf.hidden = 8,4\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.flow.levels, 2);
        assert_eq!(c.tcn.lambda, 0.2);
        assert_eq!(c.synth.withdrawal.velocity_mean, -0.5);
        assert_eq!(c.frameclf.hidden, vec![8, 4]);
    }

    #[test]
    fn rejects_unknown_and_ill_typed() {
        assert!(PipelineConfig::parse("flow.level = 2").is_err());
        assert!(PipelineConfig::parse("flow.levels = two").is_err());
        assert!(PipelineConfig::parse("flow.levels = -1").is_err());
        assert!(PipelineConfig::parse("fps = nan").is_err());
        assert!(PipelineConfig::parse("tcn.kernel = 4").is_err());
        assert!(PipelineConfig::parse("just words").is_err());
    }

    #[test]
    fn canonical_text_roundtrips() {
        let c = PipelineConfig::parse("seed = 9\nsynth.frames = 300\nframeclf.hidden =").unwrap();
        let again = PipelineConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(&[]), c.hash(&[]));
        assert_ne!(c.hash(&[]), PipelineConfig::default().hash(&[]));
        assert_eq!(c.hash(&["flow."]), PipelineConfig::default().hash(&["flow."]));
    }
}
