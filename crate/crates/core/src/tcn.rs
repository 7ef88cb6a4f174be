//! Multi-stage temporal convolutional network over per-frame feature
//! sequences.
//!
//! Each stage projects its input to `channels` with a 1×1 convolution, runs
//! `layers` dilated residual blocks (dilation `2^ℓ`, zero padding at the
//! sequence borders) and projects to two class logits. Stages after the first
//! read the previous stage's softmax output. Training minimizes, summed over
//! stages, the frame cross-entropy plus `λ` times the mean truncated squared
//! difference of consecutive log-probabilities.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::nn::{glorot, load_param, write_model_dir, Manifest, ModelIoError, Param};
use crate::scalar::{cast_slice, Scalar};

pub const CLASSES: usize = 2;

#[derive(Debug, Error)]
pub enum TcnError {
    #[error("invalid tcn config: {0}")]
    InvalidConfig(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("input has {found} dims, model expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("sequence {index}: {msg}")]
    BadSequence { index: usize, msg: String },
    #[error(transparent)]
    Io(#[from] ModelIoError),
}

pub type Result<T> = std::result::Result<T, TcnError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TcnConfig {
    pub stages: usize,
    pub layers: usize,
    pub channels: usize,
    pub kernel: usize,
    /// Weight of the smoothing term.
    pub lambda: f64,
    /// Truncation of the per-element log-probability difference.
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            stages: 2,
            layers: 6,
            channels: 32,
            kernel: 3,
            lambda: 0.15,
            tau: 4.0,
            learning_rate: 5e-3,
            epochs: 15,
            seed: 0,
        }
    }
}

impl TcnConfig {
    /// Four stages of ten layers.
    pub fn full_scale() -> Self {
        Self {
            stages: 4,
            layers: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TcnError::InvalidConfig(m.to_string()));
        if self.stages == 0 || self.layers == 0 || self.channels == 0 {
            return bad("stages, layers and channels must be ≥ 1");
        }
        if self.layers > 30 {
            return bad("at most 30 layers per stage");
        }
        if self.kernel % 2 == 0 {
            return bad("kernel size must be odd");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("λ must be ≥ 0 and τ > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be > 0");
        }
        Ok(())
    }
}

/// Frames seen by one output frame of a single stage:
/// `1 + (kernel − 1) · Σ_{ℓ<layers} 2^ℓ`.
pub fn receptive_field(layers: usize, kernel: usize) -> usize {
    1 + (kernel - 1) * ((1usize << layers) - 1)
}

/// Dot product with eight independent accumulators so it vectorizes.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + s
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// 1-D convolution over time, sequences stored time-major (`len × inputs`).
/// Weights are `[tap][out][in]`; tap `k` reads frame `t + (k − taps/2)·dilation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub taps: usize,
    pub dilation: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv<T> {
    fn zeros(inputs: usize, outputs: usize, taps: usize, dilation: usize) -> Self {
        Self {
            inputs,
            outputs,
            taps,
            dilation,
            weight: vec![T::zero(); taps * outputs * inputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn offset(&self, k: usize) -> isize {
        (k as isize - (self.taps / 2) as isize) * self.dilation as isize
    }

    fn forward(&self, x: &[T], len: usize) -> Vec<T> {
        let (ni, no) = (self.inputs, self.outputs);
        let mut y = Vec::with_capacity(len * no);
        for _ in 0..len {
            y.extend_from_slice(&self.bias);
        }
        for k in 0..self.taps {
            let off = self.offset(k);
            let w = &self.weight[k * no * ni..(k + 1) * no * ni];
            for t in 0..len {
                let s = t as isize + off;
                if s < 0 || s >= len as isize {
                    continue;
                }
                let xs = &x[s as usize * ni..(s as usize + 1) * ni];
                let yt = &mut y[t * no..(t + 1) * no];
                for (o, yo) in yt.iter_mut().enumerate() {
                    *yo += dot(&w[o * ni..(o + 1) * ni], xs);
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &[T], dy: &[T], len: usize, grad: &mut Conv<T>) -> Vec<T> {
        let (ni, no) = (self.inputs, self.outputs);
        for t in 0..len {
            for (gb, &d) in grad.bias.iter_mut().zip(&dy[t * no..(t + 1) * no]) {
                *gb += d;
            }
        }
        let mut dx = vec![T::zero(); len * ni];
        for k in 0..self.taps {
            let off = self.offset(k);
            let base = k * no * ni;
            for t in 0..len {
                let s = t as isize + off;
                if s < 0 || s >= len as isize {
                    continue;
                }
                let s = s as usize;
                let xs = &x[s * ni..(s + 1) * ni];
                for o in 0..no {
                    let g = dy[t * no + o];
                    if g == T::zero() {
                        continue;
                    }
                    let row = base + o * ni..base + (o + 1) * ni;
                    axpy(&mut grad.weight[row.clone()], g, xs);
                    axpy(&mut dx[s * ni..(s + 1) * ni], g, &self.weight[row]);
                }
            }
        }
        dx
    }

    fn params(&self) -> impl Iterator<Item = &T> {
        self.weight.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }

    fn cast<U: Scalar>(&self) -> Conv<U> {
        Conv {
            inputs: self.inputs,
            outputs: self.outputs,
            taps: self.taps,
            dilation: self.dilation,
            weight: cast_slice(&self.weight),
            bias: cast_slice(&self.bias),
        }
    }
}

/// Dilated convolution, rectifier, 1×1 convolution, residual add.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T> {
    pub dilated: Conv<T>,
    pub pointwise: Conv<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T> {
    pub input: Conv<T>,
    pub layers: Vec<Residual<T>>,
    pub output: Conv<T>,
}

/// Activations of one stage kept for the backward pass.
struct StageTrace<T> {
    input: Vec<T>,
    /// Residual stream entering each layer, then the stream after the last.
    stream: Vec<Vec<T>>,
    /// Post-rectifier hidden activations per layer.
    hidden: Vec<Vec<T>>,
    /// Per-frame log-probabilities, 64-bit.
    logp: Vec<[f64; CLASSES]>,
}

impl<T: Scalar> Stage<T> {
    fn zeros(input_dim: usize, cfg: &TcnConfig) -> Self {
        let c = cfg.channels;
        Self {
            input: Conv::zeros(input_dim, c, 1, 1),
            layers: (0..cfg.layers)
                .map(|l| Residual {
                    dilated: Conv::zeros(c, c, cfg.kernel, 1 << l),
                    pointwise: Conv::zeros(c, c, 1, 1),
                })
                .collect(),
            output: Conv::zeros(c, CLASSES, 1, 1),
        }
    }

    fn convs(&self) -> impl Iterator<Item = &Conv<T>> {
        std::iter::once(&self.input)
            .chain(self.layers.iter().flat_map(|r| [&r.dilated, &r.pointwise]))
            .chain(std::iter::once(&self.output))
    }

    fn convs_mut(&mut self) -> impl Iterator<Item = &mut Conv<T>> {
        std::iter::once(&mut self.input)
            .chain(self.layers.iter_mut().flat_map(|r| [&mut r.dilated, &mut r.pointwise]))
            .chain(std::iter::once(&mut self.output))
    }

    fn forward(&self, x: Vec<T>, len: usize) -> StageTrace<T> {
        let mut stream = vec![self.input.forward(&x, len)];
        let mut hidden = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let a = &stream[stream.len() - 1];
            let mut h = layer.dilated.forward(a, len);
            h.iter_mut().for_each(|v| *v = v.max(T::zero()));
            let mut next = layer.pointwise.forward(&h, len);
            for (n, &ai) in next.iter_mut().zip(a) {
                *n += ai;
            }
            hidden.push(h);
            stream.push(next);
        }
        let logits = self.output.forward(&stream[stream.len() - 1], len);
        let logp = logits
            .chunks_exact(CLASSES)
            .map(|z| {
                let (z0, z1) = (z[0].f64(), z[1].f64());
                let m = z0.max(z1);
                let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
                [z0 - lse, z1 - lse]
            })
            .collect();
        StageTrace {
            input: x,
            stream,
            hidden,
            logp,
        }
    }

    /// Backpropagates `dL/dlogits`; returns `dL/dinput`.
    fn backward(&self, tr: &StageTrace<T>, dlogits: &[T], len: usize, grad: &mut Stage<T>) -> Vec<T> {
        let mut da = self
            .output
            .backward(&tr.stream[self.layers.len()], dlogits, len, &mut grad.output);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let h = &tr.hidden[l];
            let mut dh = layer.pointwise.backward(h, &da, len, &mut grad.layers[l].pointwise);
            for (d, &hv) in dh.iter_mut().zip(h) {
                if hv <= T::zero() {
                    *d = T::zero();
                }
            }
            let dpre = layer.dilated.backward(&tr.stream[l], &dh, len, &mut grad.layers[l].dilated);
            for (a, d) in da.iter_mut().zip(dpre) {
                *a += d;
            }
        }
        self.input.backward(&tr.input, &da, len, &mut grad.input)
    }
}

/// Multi-stage temporal convolutional network.
#[derive(Debug, Clone, PartialEq)]
pub struct MsTcn<T> {
    pub input_dim: usize,
    pub kernel: usize,
    pub channels: usize,
    pub stages: Vec<Stage<T>>,
}

/// Loss and its parts for one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub cross_entropy: f64,
    pub smoothing: f64,
}

fn softmax_rows(logp: &[[f64; CLASSES]]) -> Vec<[f64; CLASSES]> {
    logp.iter().map(|l| [l[0].exp(), l[1].exp()]).collect()
}

/// Per-stage loss from log-probabilities, plus `dL/dlogp` when requested.
fn stage_loss(logp: &[[f64; CLASSES]], classes: &[usize], lambda: f64, tau: f64, want_grad: bool) -> (f64, f64, Vec<[f64; CLASSES]>) {
    let len = logp.len();
    let mut g = if want_grad { vec![[0.0; CLASSES]; len] } else { Vec::new() };
    let mut ce = 0.0;
    for (t, (l, &c)) in logp.iter().zip(classes).enumerate() {
        ce -= l[c];
        if want_grad {
            g[t][c] -= 1.0 / len as f64;
        }
    }
    ce /= len as f64;
    let mut smooth = 0.0;
    if len > 1 {
        let n = ((len - 1) * CLASSES) as f64;
        let cap = tau * tau;
        for t in 1..len {
            for c in 0..CLASSES {
                let d = logp[t][c] - logp[t - 1][c];
                let sq = d * d;
                if sq < cap {
                    smooth += sq;
                    if want_grad {
                        let gd = lambda * 2.0 * d / n;
                        g[t][c] += gd;
                        g[t - 1][c] -= gd;
                    }
                } else {
                    smooth += cap;
                }
            }
        }
        smooth /= n;
    }
    (ce, smooth, g)
}

/// Loss of per-stage probability sequences against phase labels (1 or 2):
/// `Σ_s CE_s + λ · mean_{t,c} min((log p_{t,c} − log p_{t−1,c})², τ²)`.
pub fn loss(stage_probs: &[Vec<[f64; CLASSES]>], labels: &[u8], lambda: f64, tau: f64) -> LossParts {
    let classes: Vec<usize> = labels.iter().map(|&l| l as usize - 1).collect();
    let mut parts = LossParts {
        total: 0.0,
        cross_entropy: 0.0,
        smoothing: 0.0,
    };
    for probs in stage_probs {
        let logp: Vec<[f64; CLASSES]> = probs
            .iter()
            .map(|p| [p[0].max(f64::MIN_POSITIVE).ln(), p[1].max(f64::MIN_POSITIVE).ln()])
            .collect();
        let (ce, sm, _) = stage_loss(&logp, &classes, lambda, tau, false);
        parts.cross_entropy += ce;
        parts.smoothing += sm;
    }
    parts.total = parts.cross_entropy + lambda * parts.smoothing;
    parts
}

impl<T: Scalar> MsTcn<T> {
    pub fn zeros(cfg: &TcnConfig, input_dim: usize) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(TcnError::InvalidConfig("input dim must be ≥ 1".into()));
        }
        Ok(Self {
            input_dim,
            kernel: cfg.kernel,
            channels: cfg.channels,
            stages: (0..cfg.stages)
                .map(|s| Stage::zeros(if s == 0 { input_dim } else { CLASSES }, cfg))
                .collect(),
        })
    }

    pub fn layers(&self) -> usize {
        self.stages[0].layers.len()
    }

    /// Receptive field of one stage.
    pub fn stage_receptive_field(&self) -> usize {
        receptive_field(self.layers(), self.kernel)
    }

    /// Receptive field of the final stage's output through all stages.
    pub fn receptive_field(&self) -> usize {
        self.stages.len() * (self.stage_receptive_field() - 1) + 1
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.stages.iter().flat_map(|s| s.convs()).flat_map(|c| c.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.stages.iter_mut().flat_map(|s| s.convs_mut()).flat_map(|c| c.params_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().count()
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> MsTcn<U> {
        MsTcn {
            input_dim: self.input_dim,
            kernel: self.kernel,
            channels: self.channels,
            stages: self
                .stages
                .iter()
                .map(|s| Stage {
                    input: s.input.cast(),
                    layers: s
                        .layers
                        .iter()
                        .map(|r| Residual {
                            dilated: r.dilated.cast(),
                            pointwise: r.pointwise.cast(),
                        })
                        .collect(),
                    output: s.output.cast(),
                })
                .collect(),
        }
    }

    fn flatten(&self, rows: &[Vec<T>]) -> Result<Vec<T>> {
        if rows.is_empty() {
            return Err(TcnError::EmptySequence);
        }
        let mut x = Vec::with_capacity(rows.len() * self.input_dim);
        for r in rows {
            if r.len() != self.input_dim {
                return Err(TcnError::InputDim {
                    expected: self.input_dim,
                    found: r.len(),
                });
            }
            x.extend_from_slice(r);
        }
        Ok(x)
    }

    fn traces(&self, x: Vec<T>, len: usize) -> Vec<StageTrace<T>> {
        let mut out: Vec<StageTrace<T>> = Vec::with_capacity(self.stages.len());
        let mut input = x;
        for stage in &self.stages {
            let tr = stage.forward(input, len);
            input = tr
                .logp
                .iter()
                .flat_map(|l| [T::of(l[0].exp()), T::of(l[1].exp())])
                .collect();
            out.push(tr);
        }
        out
    }

    /// Per-stage softmax probabilities, `stages × len`.
    pub fn forward(&self, rows: &[Vec<T>]) -> Result<Vec<Vec<[f64; CLASSES]>>> {
        let x = self.flatten(rows)?;
        Ok(self
            .traces(x, rows.len())
            .iter()
            .map(|tr| softmax_rows(&tr.logp))
            .collect())
    }

    /// Final-stage probabilities.
    pub fn infer(&self, rows: &[Vec<T>]) -> Result<Vec<[f64; CLASSES]>> {
        Ok(self.forward(rows)?.pop().unwrap_or_default())
    }

    /// Loss of one labeled sequence and its gradient.
    pub fn loss_and_grad(&self, rows: &[Vec<T>], labels: &[u8], lambda: f64, tau: f64) -> Result<(LossParts, MsTcn<T>)> {
        let len = rows.len();
        if labels.len() != len {
            return Err(TcnError::BadSequence {
                index: 0,
                msg: format!("{len} frames, {} labels", labels.len()),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != 2) {
            return Err(TcnError::BadSequence {
                index: 0,
                msg: format!("label {l} is not 1 or 2"),
            });
        }
        let classes: Vec<usize> = labels.iter().map(|&l| l as usize - 1).collect();
        let x = self.flatten(rows)?;
        let traces = self.traces(x, len);
        let mut grad = self.clone();
        grad.params_mut().for_each(|p| *p = T::zero());
        let mut parts = LossParts {
            total: 0.0,
            cross_entropy: 0.0,
            smoothing: 0.0,
        };
        // dL/dp of the current stage's softmax output from the stage after it
        let mut dprobs: Option<Vec<T>> = None;
        for s in (0..self.stages.len()).rev() {
            let tr = &traces[s];
            let (ce, sm, dlogp) = stage_loss(&tr.logp, &classes, lambda, tau, true);
            parts.cross_entropy += ce;
            parts.smoothing += sm;
            let mut dlogits = Vec::with_capacity(len * CLASSES);
            for (t, (l, g)) in tr.logp.iter().zip(&dlogp).enumerate() {
                let p = [l[0].exp(), l[1].exp()];
                let mut dz = [0.0; CLASSES];
                let gs: f64 = g.iter().sum();
                for c in 0..CLASSES {
                    dz[c] = g[c] - p[c] * gs;
                }
                if let Some(dp) = &dprobs {
                    let dp = [dp[t * CLASSES].f64(), dp[t * CLASSES + 1].f64()];
                    let pd = p[0] * dp[0] + p[1] * dp[1];
                    for c in 0..CLASSES {
                        dz[c] += p[c] * (dp[c] - pd);
                    }
                }
                dlogits.extend(dz.iter().map(|&v| T::of(v)));
            }
            let dx = self.stages[s].backward(tr, &dlogits, len, &mut grad.stages[s]);
            dprobs = Some(dx);
        }
        parts.total = parts.cross_entropy + lambda * parts.smoothing;
        Ok((parts, grad))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let header = vec![
            "kind mstcn".to_string(),
            format!("input_dim {}", self.input_dim),
            format!("stages {}", self.stages.len()),
            format!("layers {}", self.layers()),
            format!("channels {}", self.channels),
            format!("kernel {}", self.kernel),
            format!("classes {CLASSES}"),
            "activations relu softmax".to_string(),
        ];
        let mut params = Vec::new();
        for (s, stage) in self.stages.iter().enumerate() {
            let mut named = vec![("input".to_string(), &stage.input)];
            for (l, r) in stage.layers.iter().enumerate() {
                named.push((format!("layer{l}.dilated"), &r.dilated));
                named.push((format!("layer{l}.pointwise"), &r.pointwise));
            }
            named.push(("output".to_string(), &stage.output));
            for (name, c) in named {
                params.push(Param {
                    name: format!("stage{s}.{name}.weight"),
                    dims: vec![c.taps, c.outputs, c.inputs],
                    data: &c.weight[..],
                });
                params.push(Param {
                    name: format!("stage{s}.{name}.bias"),
                    dims: vec![c.outputs],
                    data: &c.bias[..],
                });
            }
        }
        write_model_dir(dir, &header, &params)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m = Manifest::read(dir)?;
        if m.values("kind")? != ["mstcn"] || m.usize("classes")? != CLASSES {
            return Err(m.err("not a two-class mstcn model").into());
        }
        let cfg = TcnConfig {
            stages: m.usize("stages")?,
            layers: m.usize("layers")?,
            channels: m.usize("channels")?,
            kernel: m.usize("kernel")?,
            ..TcnConfig::default()
        };
        let mut model = Self::zeros(&cfg, m.usize("input_dim")?)?;
        for (s, stage) in model.stages.iter_mut().enumerate() {
            let mut names = vec!["input".to_string()];
            for l in 0..cfg.layers {
                names.push(format!("layer{l}.dilated"));
                names.push(format!("layer{l}.pointwise"));
            }
            names.push("output".to_string());
            for (name, c) in names.iter().zip(stage.convs_mut()) {
                c.weight = load_param(dir, &format!("stage{s}.{name}.weight"), &[c.taps, c.outputs, c.inputs])?;
                c.bias = load_param(dir, &format!("stage{s}.{name}.bias"), &[c.outputs])?;
            }
        }
        Ok(model)
    }
}

/// Seeded Glorot-uniform weights (fan counts include the taps), zero biases.
pub fn init_tcn<T: Scalar>(cfg: &TcnConfig, input_dim: usize, seed: u64) -> Result<MsTcn<T>> {
    let mut model = MsTcn::zeros(cfg, input_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in model.stages.iter_mut().flat_map(|s| s.convs_mut()) {
        c.weight = glorot(c.inputs * c.taps, c.outputs * c.taps, c.weight.len(), &mut rng);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnReport {
    /// Mean per-sequence loss over each epoch.
    pub epoch_loss: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update<'a, T: Scalar + 'a>(
        &mut self,
        params: impl Iterator<Item = &'a mut T>,
        grads: impl Iterator<Item = &'a T>,
        lr: f64,
    ) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let g = g.f64();
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p = T::of(p.f64() - lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS));
        }
    }
}

/// Trains with one full-sequence Adam step per video, videos reshuffled
/// every epoch.
pub fn train_tcn<T: Scalar>(
    mut model: MsTcn<T>,
    sequences: &[Vec<Vec<T>>],
    labels: &[Vec<u8>],
    cfg: &TcnConfig,
) -> Result<(MsTcn<T>, TcnReport)> {
    cfg.validate()?;
    if sequences.len() != labels.len() {
        return Err(TcnError::InvalidConfig(format!(
            "{} sequences, {} label sequences",
            sequences.len(),
            labels.len()
        )));
    }
    for (i, (s, l)) in sequences.iter().zip(labels).enumerate() {
        if s.is_empty() || s.len() != l.len() {
            return Err(TcnError::BadSequence {
                index: i,
                msg: format!("{} frames, {} labels", s.len(), l.len()),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(model.param_count());
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (parts, grad) = model
                .loss_and_grad(&sequences[i], &labels[i], cfg.lambda, cfg.tau)
                .map_err(|e| match e {
                    TcnError::BadSequence { msg, .. } => TcnError::BadSequence { index: i, msg },
                    e => e,
                })?;
            total += parts.total;
            adam.update(model.params_mut(), grad.params(), cfg.learning_rate);
        }
        epoch_loss.push(total / sequences.len().max(1) as f64);
    }
    Ok((model, TcnReport { epoch_loss }))
}

/// Final-stage probabilities for many sequences in parallel.
pub fn infer_many<T: Scalar>(model: &MsTcn<T>, sequences: &[Vec<Vec<T>>]) -> Result<Vec<Vec<[f64; CLASSES]>>> {
    sequences.par_iter().map(|s| model.infer(s)).collect()
}
