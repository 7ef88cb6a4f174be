//! Single-frame phase classifier trained on motion-derived weak labels.
//!
//! A fully connected network with rectifier hidden layers and a two-class
//! softmax output. Its last hidden activations are the frame embedding
//! consumed by the temporal network.

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::nn::{dot, glorot, load_param, softmax2, write_model_dir, Manifest, ModelIoError, Param};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FrameClfError {
    #[error("invalid layer dims {0:?}: need ≥ 2 layers, all widths ≥ 1, 2 outputs")]
    BadDims(Vec<usize>),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("weak labels contain no frame of phase {0}; balanced sampling is unsatisfiable")]
    UnsatisfiableBalance(u8),
    #[error("features and labels disagree: {0}")]
    LengthMismatch(String),
    #[error("input has {found} dims, model expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("model has no hidden layer to embed from")]
    NoHiddenLayer,
    #[error(transparent)]
    Io(#[from] ModelIoError),
}

pub type Result<T> = std::result::Result<T, FrameClfError>;

pub const DEFAULT_HIDDEN: usize = 16;

/// Dense layer `y = W x + b`, `W` row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.weight
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, &b)| T::of(dot(row, x) + b.f64())),
        );
    }
}

/// Feed-forward classifier: rectifier after every layer but the last, then
/// a two-class softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Per-example forward state kept for backpropagation.
struct Trace<T> {
    acts: Vec<Vec<T>>,
    probs: [f64; 2],
}

impl<T: Scalar> Mlp<T> {
    /// All-zero model with the given widths.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weight before bias.
    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weight: crate::scalar::cast_slice(&l.weight),
                    bias: crate::scalar::cast_slice(&l.bias),
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(FrameClfError::InputDim {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[T]) -> Trace<T> {
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        let mut z = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&acts[k], &mut z);
            if k < last {
                acts.push(z.iter().map(|&v| v.max(T::zero())).collect());
            }
        }
        let probs = softmax2(z[0].f64(), z[1].f64());
        Trace { acts, probs }
    }

    /// Class probabilities `[p(phase 1), p(phase 2)]`.
    pub fn predict_proba(&self, x: &[T]) -> Result<[f64; 2]> {
        self.check_input(x)?;
        Ok(self.trace(x).probs)
    }

    /// Post-rectifier activations of the last hidden layer.
    pub fn embed(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        if self.layers.len() < 2 {
            return Err(FrameClfError::NoHiddenLayer);
        }
        Ok(self.trace(x).acts.pop().unwrap_or_default())
    }

    /// Output layer and softmax applied to an embedding.
    pub fn head(&self, embedding: &[T]) -> [f64; 2] {
        let mut z = Vec::new();
        self.layers[self.layers.len() - 1].apply(embedding, &mut z);
        softmax2(z[0].f64(), z[1].f64())
    }

    /// Mean cross-entropy over `(x, class)` pairs (`class` ∈ {0, 1}) and its
    /// gradient, both accumulated in 64 bits.
    pub fn loss_and_grad(&self, xs: &[&[T]], classes: &[usize]) -> (f64, Mlp<f64>) {
        let mut grad = self.cast::<f64>();
        grad.params_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (x, &c) in xs.iter().zip(classes) {
            let tr = self.trace(x);
            loss -= tr.probs[c].max(f64::MIN_POSITIVE).ln();
            // dL/dz for softmax + cross-entropy
            let mut delta: Vec<f64> = vec![tr.probs[0], tr.probs[1]];
            delta[c] -= 1.0;
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let a = &tr.acts[k];
                let g = &mut grad.layers[k];
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &mut g.weight[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &ai) in row.iter_mut().zip(a) {
                        *gw += d * ai.f64();
                    }
                }
                if k == 0 {
                    break;
                }
                delta = (0..layer.inputs)
                    .map(|i| {
                        if a[i] > T::zero() {
                            (0..layer.outputs).map(|o| delta[o] * layer.weight[o * layer.inputs + i].f64()).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        let n = xs.len().max(1) as f64;
        grad.params_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        let mut acts = vec!["relu"; self.layers.len() - 1];
        acts.push("softmax");
        let header = vec![
            "kind mlp".to_string(),
            format!("dims {}", dims.join(" ")),
            format!("activations {}", acts.join(" ")),
        ];
        let mut params = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            params.push(Param {
                name: format!("layer{k}.weight"),
                dims: vec![l.outputs, l.inputs],
                data: &l.weight[..],
            });
            params.push(Param {
                name: format!("layer{k}.bias"),
                dims: vec![l.outputs],
                data: &l.bias[..],
            });
        }
        write_model_dir(dir, &header, &params)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m = Manifest::read(dir)?;
        if m.values("kind")? != ["mlp"] {
            return Err(m.err("not an mlp model").into());
        }
        let dims = m.usizes("dims")?;
        let mut model = Self::zeros(&dims)?;
        let mut expected = vec!["relu"; dims.len() - 2];
        expected.push("softmax");
        if m.values("activations")? != expected.as_slice() {
            return Err(m.err("unsupported activations").into());
        }
        for (k, l) in model.layers.iter_mut().enumerate() {
            l.weight = load_param(dir, &format!("layer{k}.weight"), &[l.outputs, l.inputs])?;
            l.bias = load_param(dir, &format!("layer{k}.bias"), &[l.outputs])?;
        }
        Ok(model)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) || dims[dims.len() - 1] != 2 {
        return Err(FrameClfError::BadDims(dims.to_vec()));
    }
    Ok(())
}

/// Seeded Glorot-uniform weights and zero biases.
pub fn init_model<T: Scalar>(dims: &[usize], seed: u64) -> Result<Mlp<T>> {
    let mut model = Mlp::zeros(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in &mut model.layers {
        l.weight = glorot(l.inputs, l.outputs, l.weight.len(), &mut rng);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Layer widths; `[input, 16, 2]` by default.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Frames drawn per class (capped at the smaller class count).
    pub samples_per_class: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![DEFAULT_HIDDEN],
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            samples_per_class: 20_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FrameClfError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.samples_per_class == 0 {
            return bad("samples per class must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be ≥ 1");
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(&self.hidden);
        d.push(2);
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean cross-entropy over the balanced sample after each epoch.
    pub epoch_loss: Vec<f64>,
    pub final_loss: f64,
    /// Accuracy against the weak labels over the balanced sample.
    pub accuracy: f64,
    pub samples_per_class: usize,
}

/// Indices of exactly `k` items of each class (0 and 1), drawn uniformly
/// without replacement; `k` is capped at the smaller class count.
pub fn balanced_sample(classes: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    for (c, idx) in by_class.iter().enumerate() {
        if idx.is_empty() {
            return Err(FrameClfError::UnsatisfiableBalance(c as u8 + 1));
        }
    }
    let k = k.min(by_class[0].len()).min(by_class[1].len());
    let mut out = Vec::with_capacity(2 * k);
    for idx in &by_class {
        out.extend(idx.choose_multiple(rng, k).copied());
    }
    Ok(out)
}

/// Trains on frames pooled across videos. `labels` hold phases 1 and 2.
pub fn train(features: &[Vec<Vec<f32>>], labels: &[Vec<u8>], cfg: &TrainConfig) -> Result<(Mlp<f32>, TrainReport)> {
    cfg.validate()?;
    if features.len() != labels.len() {
        return Err(FrameClfError::LengthMismatch(format!(
            "{} feature sequences, {} label sequences",
            features.len(),
            labels.len()
        )));
    }
    let mut xs: Vec<&[f32]> = Vec::new();
    let mut classes = Vec::new();
    for (v, (f, l)) in features.iter().zip(labels).enumerate() {
        if f.len() != l.len() {
            return Err(FrameClfError::LengthMismatch(format!(
                "video {v}: {} frames, {} labels",
                f.len(),
                l.len()
            )));
        }
        for (x, &p) in f.iter().zip(l) {
            if p != 1 && p != 2 {
                return Err(FrameClfError::LengthMismatch(format!("video {v}: label {p} is not 1 or 2")));
            }
            xs.push(x);
            classes.push(p as usize - 1);
        }
    }
    let input = xs.first().map_or(0, |x| x.len());
    if xs.iter().any(|x| x.len() != input) {
        return Err(FrameClfError::LengthMismatch("ragged feature rows".into()));
    }
    let dims = cfg.dims(input);
    let mut model = init_model::<f32>(&dims, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order = balanced_sample(&classes, cfg.samples_per_class, &mut rng)?;
    let k = order.len() / 2;

    let n_params = model.param_count();
    let mut velocity = vec![0.0f64; n_params];
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f32]> = batch.iter().map(|&i| xs[i]).collect();
            let bc: Vec<usize> = batch.iter().map(|&i| classes[i]).collect();
            let (_, grad) = model.loss_and_grad(&bx, &bc);
            for ((p, v), g) in model.params_mut().zip(&mut velocity).zip(grad.params()) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p = (p.f64() + *v) as f32;
            }
        }
        epoch_loss.push(sample_loss(&model, &xs, &classes, &order).0);
    }
    let (final_loss, accuracy) = sample_loss(&model, &xs, &classes, &order);
    Ok((
        model,
        TrainReport {
            epoch_loss,
            final_loss,
            accuracy,
            samples_per_class: k,
        },
    ))
}

fn sample_loss(model: &Mlp<f32>, xs: &[&[f32]], classes: &[usize], idx: &[usize]) -> (f64, f64) {
    let per: Vec<(f64, bool)> = idx
        .par_iter()
        .map(|&i| {
            let p = model.trace(xs[i]).probs;
            let c = classes[i];
            (-p[c].max(f64::MIN_POSITIVE).ln(), p[c] >= p[1 - c])
        })
        .collect();
    let loss: f64 = per.iter().map(|r| r.0).sum();
    let correct = per.iter().filter(|r| r.1).count();
    let n = idx.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Probabilities for every row.
pub fn predict_sequence(model: &Mlp<f32>, rows: &[Vec<f32>]) -> Result<Vec<[f64; 2]>> {
    rows.par_iter().map(|x| model.predict_proba(x)).collect()
}

/// Embeddings for every row.
pub fn embed_sequence(model: &Mlp<f32>, rows: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    rows.par_iter().map(|x| model.embed(x)).collect()
}
