//! Model assembly, Adam, training and evaluation loops, checkpoints and experiment runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{finite_diff_check, GradCheck, Tape, Tensor, Var};
use crate::dataio::{load_dataset, parse_tu_dataset_with, split_dataset, Dataset, Reader, Split, SplitSpec, Task, TuOptions, Writer};
use crate::error::{PanError, Result};
use crate::graph::{CsrGraph, Label};
use crate::layers::{cross_entropy_on_tape, panconv_on_tape, pool_on_tape, pool_score_on_tape, readout_on_tape, PoolVariant, PoolVars, Readout};
use crate::met::NormMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Output width of each PANConv block.
    pub conv_dims: Vec<usize>,
    /// Whether a PANPool follows each block; empty means every block.
    pub pool_mask: Vec<bool>,
    #[serde(rename = "L")]
    pub cutoff: usize,
    pub pool: PoolVariant,
    pub ratio: f64,
    pub norm: NormMode,
    pub readout: Readout,
    /// Hidden widths of the dense head before the output layer.
    pub head_dims: Vec<usize>,
    pub share_theta: bool,
    /// Adds a learned bias row after each `M X W`.
    pub conv_bias: bool,
    /// Standardizes each input feature with train-split node statistics.
    pub standardize_inputs: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_dims: vec![64, 64, 64],
            pool_mask: Vec::new(),
            cutoff: 4,
            pool: PoolVariant::Hybrid,
            ratio: 0.5,
            norm: NormMode::Symmetric,
            readout: Readout::Mean,
            head_dims: Vec::new(),
            share_theta: false,
            conv_bias: true,
            standardize_inputs: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_dims.is_empty() {
            return Err(PanError::Config("model needs at least one conv block".into()));
        }
        if self.conv_dims.iter().chain(&self.head_dims).any(|&d| d == 0) {
            return Err(PanError::Config("layer widths must be at least 1".into()));
        }
        if self.cutoff > 10 {
            return Err(PanError::Config(format!("cutoff L must be in 0..=10, got {}", self.cutoff)));
        }
        if !self.pool_mask.is_empty() && self.pool_mask.len() != self.conv_dims.len() {
            return Err(PanError::Config(format!(
                "pool_mask has {} entries for {} conv blocks",
                self.pool_mask.len(),
                self.conv_dims.len()
            )));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(PanError::Config(format!("pool ratio must be in (0, 1], got {}", self.ratio)));
        }
        Ok(())
    }

    pub fn pools_after(&self, block: usize) -> bool {
        self.pool_mask.get(block).copied().unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 20,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(PanError::Config(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.weight_decay) {
            return Err(PanError::Config(format!("weight decay must be in [0, 1), got {}", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(PanError::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Train-split label statistics for regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelNorm {
    pub mean: f64,
    pub std: f64,
}

impl LabelNorm {
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn fit(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::identity();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: if var > 0.0 { var.sqrt() } else { 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Conv { theta: usize, weight: usize, bias: Option<usize> },
    Pool { p: Option<usize>, beta: Option<usize> },
    Dense { weight: usize, bias: usize },
}

/// Parameters plus the layer program that consumes them.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub feature_dim: usize,
    pub task: Task,
    pub label_norm: LabelNorm,
    /// Per-feature `(mean, std)` applied to inputs when set.
    pub input_norm: Option<Vec<(f64, f64)>>,
    pub params: Vec<Tensor>,
    pub names: Vec<String>,
    program: Vec<Slot>,
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-a..a))
}

/// Initializes a model: Glorot weights, zero theta, projection uniform in `±1/sqrt(d)`, beta 1, zero biases.
pub fn build_model(cfg: &ModelConfig, feature_dim: usize, task: Task, seed: u64) -> Result<Model> {
    cfg.validate()?;
    if feature_dim == 0 {
        return Err(PanError::Config("feature dimension must be at least 1".into()));
    }
    if let Task::Classify(c) = task {
        if c < 1 {
            return Err(PanError::Config("classification needs at least one class".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut params = Vec::new();
    let mut names = Vec::new();
    let mut push = |name: String, t: Tensor, params: &mut Vec<Tensor>| {
        names.push(name);
        params.push(t);
        params.len() - 1
    };
    let shared = cfg
        .share_theta
        .then(|| push("theta".into(), Array2::zeros((cfg.cutoff + 1, 1)), &mut params));

    let mut program = Vec::new();
    let mut d = feature_dim;
    for (b, &out) in cfg.conv_dims.iter().enumerate() {
        let theta = match shared {
            Some(t) => t,
            None => push(format!("conv{b}.theta"), Array2::zeros((cfg.cutoff + 1, 1)), &mut params),
        };
        let weight = push(format!("conv{b}.weight"), glorot(&mut rng, d, out), &mut params);
        let bias = cfg
            .conv_bias
            .then(|| push(format!("conv{b}.bias"), Array2::zeros((1, out)), &mut params));
        program.push(Slot::Conv { theta, weight, bias });
        d = out;
        if cfg.pools_after(b) {
            let bound = 1.0 / (d as f64).sqrt();
            let p = cfg.pool.uses_projection().then(|| {
                let t = Array2::from_shape_fn((d, 1), |_| rng.gen_range(-bound..bound));
                push(format!("pool{b}.p"), t, &mut params)
            });
            let beta = cfg
                .pool
                .uses_beta()
                .then(|| push(format!("pool{b}.beta"), Array2::ones((1, 1)), &mut params));
            program.push(Slot::Pool { p, beta });
        }
    }
    let mut dims = cfg.head_dims.clone();
    dims.push(task.num_outputs());
    for (j, &out) in dims.iter().enumerate() {
        let weight = push(format!("head{j}.weight"), glorot(&mut rng, d, out), &mut params);
        let bias = push(format!("head{j}.bias"), Array2::zeros((1, out)), &mut params);
        program.push(Slot::Dense { weight, bias });
        d = out;
    }
    Ok(Model {
        cfg: cfg.clone(),
        feature_dim,
        task,
        label_norm: LabelNorm::identity(),
        input_norm: None,
        params,
        names,
        program,
    })
}

impl Model {
    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Output row (`1 x outputs`) for one graph, with parameters supplied as tape variables.
    pub fn forward<'t>(&self, tape: &'t Tape, vars: &[Var<'t>], g: &CsrGraph) -> Result<Var<'t>> {
        if g.feature_dim() != self.feature_dim {
            return Err(PanError::ShapeMismatch {
                op: "model input",
                expected: self.feature_dim.to_string(),
                got: g.feature_dim().to_string(),
            });
        }
        let mut graph = g.clone();
        let mut x = tape.constant(self.inputs(g));
        let mut last_met = None;
        let mut readout_done = false;
        for slot in &self.program {
            match *slot {
                Slot::Conv { theta, weight, bias } => {
                    let (mut out, met) = panconv_on_tape(tape, x, &graph, vars[theta], vars[weight], self.cfg.norm)?;
                    if let Some(b) = bias {
                        out = out.add_broadcast_row(vars[b])?;
                    }
                    x = out.relu();
                    last_met = Some(met);
                }
                Slot::Pool { p, beta } => {
                    let met = last_met.take().expect("pool follows a conv");
                    let pv = PoolVars {
                        p: p.map(|i| vars[i]),
                        beta: beta.map(|i| vars[i]),
                    };
                    let (pooled, pooled_graph, _) = pool_on_tape(x, &graph, &met, &pv, self.cfg.pool, self.cfg.ratio)?;
                    x = pooled;
                    graph = pooled_graph;
                }
                Slot::Dense { weight, bias } => {
                    if !readout_done {
                        x = readout_on_tape(x, &vec![0; x.shape().0], 1, self.cfg.readout)?;
                        readout_done = true;
                    } else {
                        x = x.relu();
                    }
                    x = x.matmul(vars[weight])?.add_broadcast_row(vars[bias])?;
                }
            }
        }
        Ok(x)
    }

    /// Node features after the optional input standardization.
    pub fn inputs(&self, g: &CsrGraph) -> Tensor {
        let mut x = g.features().clone();
        if let Some(norm) = &self.input_norm {
            for (mut col, &(mean, sd)) in x.columns_mut().into_iter().zip(norm) {
                col.mapv_inplace(|v| (v - mean) / sd);
            }
        }
        x
    }

    /// Per-graph loss on the tape: cross-entropy, or MSE against the normalized target.
    pub fn loss<'t>(&self, tape: &'t Tape, vars: &[Var<'t>], g: &CsrGraph) -> Result<Var<'t>> {
        let out = self.forward(tape, vars, g)?;
        match (self.task, g.label()) {
            (Task::Classify(_), Label::Class(c)) => cross_entropy_on_tape(out, &[c]),
            (Task::Regress, Label::Value(v)) => {
                let t = (v - self.label_norm.mean) / self.label_norm.std;
                out.mse_loss(tape.constant(Array2::from_elem((1, 1), t)))
            }
            (task, label) => Err(PanError::InvalidArgument(format!("label {label:?} does not fit task {task:?}"))),
        }
    }

    /// Raw outputs for one graph without recording gradients.
    pub fn predict(&self, g: &CsrGraph) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let vars: Vec<_> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward(&tape, &vars, g)?;
        let v = out.value().row(0).to_vec();
        Ok(v)
    }

    /// Loss value and gradients for a single graph.
    pub fn loss_and_grad(&self, g: &CsrGraph) -> Result<(f64, Vec<Tensor>)> {
        let tape = Tape::new();
        let vars: Vec<_> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = self.loss(&tape, &vars, g)?;
        let value = loss.item();
        if !value.is_finite() {
            return Err(PanError::NonFinite("training loss".into()));
        }
        let grads = tape.backward(loss)?;
        Ok((value, vars.iter().map(|&v| grads.get_or_zeros(v)).collect()))
    }

    /// Node scores of the first pooling layer on `g`, using the trained parameters.
    pub fn first_pool_scores(&self, g: &CsrGraph) -> Result<Vec<f64>> {
        let (conv, pool) = match self.program.as_slice() {
            [Slot::Conv { theta, weight, bias }, Slot::Pool { p, beta }, ..] => ((*theta, *weight, *bias), (*p, *beta)),
            _ => return Err(PanError::InvalidArgument("model has no pooling after its first conv".into())),
        };
        if g.feature_dim() != self.feature_dim {
            return Err(PanError::ShapeMismatch {
                op: "first_pool_scores",
                expected: self.feature_dim.to_string(),
                got: g.feature_dim().to_string(),
            });
        }
        let tape = Tape::new();
        let c = |i: usize| tape.constant(self.params[i].clone());
        let x = tape.constant(self.inputs(g));
        let (mut out, met) = panconv_on_tape(&tape, x, g, c(conv.0), c(conv.1), self.cfg.norm)?;
        if let Some(b) = conv.2 {
            out = out.add_broadcast_row(c(b))?;
        }
        let vars = PoolVars {
            p: pool.0.map(c),
            beta: pool.1.map(c),
        };
        let score = pool_score_on_tape(out.relu(), &met, &vars, self.cfg.pool)?;
        let v = score.value().column(0).to_vec();
        Ok(v)
    }

    /// `exp(theta)` for each distinct theta parameter, in layer order.
    pub fn series_weights(&self) -> Vec<Vec<f64>> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for slot in &self.program {
            if let Slot::Conv { theta, .. } = *slot {
                if !seen.contains(&theta) {
                    seen.push(theta);
                    out.push(self.params[theta].iter().map(|t| t.exp()).collect());
                }
            }
        }
        out
    }

    /// Finite-difference check of the mean loss over `graphs`, per parameter tensor.
    pub fn grad_check(&self, graphs: &[&CsrGraph], eps: f64) -> Result<GradCheck> {
        let n = graphs.len().max(1) as f64;
        finite_diff_check(
            |tape, vars| {
                let mut total: Option<Var> = None;
                for g in graphs {
                    let l = self.loss(tape, vars, g)?;
                    total = Some(match total {
                        None => l,
                        Some(t) => t.add(l)?,
                    });
                }
                Ok(total.ok_or_else(|| PanError::InvalidArgument("no graphs to check".into()))?.scale_const(1.0 / n))
            },
            &self.params,
            eps,
        )
    }
}

// ---------------------------------------------------------------------------
// Adam

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update with decoupled weight decay (`p <- p (1 - lr wd)` first).
///
/// A non-finite gradient aborts the step before anything is modified.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &OptimConfig) -> Result<()> {
    if grads.len() != params.len() {
        return Err(PanError::ShapeMismatch {
            op: "adam_step".into(),
            expected: params.len().to_string(),
            got: grads.len().to_string(),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.dim() != g.dim() {
            return Err(PanError::ShapeMismatch {
                op: "adam_step",
                expected: format!("param {i} {:?}", p.dim()),
                got: format!("{:?}", g.dim()),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(PanError::NonFinite(format!("gradient of parameter {i}")));
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *p *= decay;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// loops

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean training-objective loss.
    pub loss: f64,
    /// Accuracy for classification, MAE in label units for regression.
    pub metric: f64,
    pub n: usize,
}

/// One pass over `train` in shuffled mini-batches. Returns the mean per-graph loss.
///
/// Gradients are accumulated graph by graph in batch order, so results do not depend on
/// thread scheduling.
pub fn train_epoch(
    model: &mut Model,
    ds: &Dataset,
    train: &[usize],
    state: &mut AdamState,
    cfg: &OptimConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut order = train.to_vec();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let mut acc: Vec<Tensor> = model.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        for &i in batch {
            let (l, grads) = model.loss_and_grad(&ds.graphs[i])?;
            total += l;
            for (a, g) in acc.iter_mut().zip(&grads) {
                *a += g;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        acc.iter_mut().for_each(|a| a.mapv_inplace(|v| v * scale));
        adam_step(&mut model.params, &acc, state, cfg)?;
    }
    Ok(total / order.len().max(1) as f64)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(model: &Model, ds: &Dataset, idx: &[usize]) -> Result<Evaluation> {
    let mut loss = 0.0;
    let mut metric = 0.0;
    for &i in idx {
        let g = &ds.graphs[i];
        let out = model.predict(g)?;
        match (model.task, g.label()) {
            (Task::Classify(_), Label::Class(c)) => {
                let mx = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + out.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
                loss += lse - out[c];
                metric += (argmax(&out) == c) as u8 as f64;
            }
            (Task::Regress, Label::Value(v)) => {
                let t = (v - model.label_norm.mean) / model.label_norm.std;
                loss += (out[0] - t).powi(2);
                metric += (out[0] * model.label_norm.std + model.label_norm.mean - v).abs();
            }
            (task, label) => {
                return Err(PanError::InvalidArgument(format!("label {label:?} does not fit task {task:?}")));
            }
        }
    }
    let n = idx.len().max(1) as f64;
    Ok(Evaluation {
        loss: loss / n,
        metric: metric / n,
        n: idx.len(),
    })
}

// ---------------------------------------------------------------------------
// checkpoints

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"PANCK1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    model: ModelConfig,
    feature_dim: usize,
    task: Task,
    label_norm: LabelNorm,
    #[serde(default)]
    input_norm: Option<Vec<(f64, f64)>>,
    names: Vec<String>,
    split: Option<SplitSpec>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    /// Split the model was trained with, when known.
    pub split: Option<SplitSpec>,
}

pub fn checkpoint_to_bytes(model: &Model, split: Option<SplitSpec>) -> Result<Vec<u8>> {
    let meta = CheckpointMeta {
        model: model.cfg.clone(),
        feature_dim: model.feature_dim,
        task: model.task,
        label_norm: model.label_norm,
        input_norm: model.input_norm.clone(),
        names: model.names.clone(),
        split,
    };
    let mut w = Writer::new(CHECKPOINT_MAGIC);
    w.str(&serde_json::to_string(&meta)?);
    w.u64(model.params.len() as u64);
    for p in &model.params {
        w.u64(p.nrows() as u64);
        w.u64(p.ncols() as u64);
        p.iter().for_each(|&v| w.f64(v));
    }
    Ok(w.finish())
}

pub fn checkpoint_from_bytes(data: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::open(data, CHECKPOINT_MAGIC, "PANCK1 checkpoint")?;
    let meta: CheckpointMeta = serde_json::from_str(&r.str()?)?;
    let mut model = build_model(&meta.model, meta.feature_dim, meta.task, 0)?;
    let count = r.usize()?;
    if count != model.params.len() || meta.names != model.names {
        return Err(PanError::Format(format!(
            "checkpoint has {count} parameters, model layout expects {}",
            model.params.len()
        )));
    }
    for p in model.params.iter_mut() {
        let (rows, cols) = (r.usize()?, r.usize()?);
        if (rows, cols) != p.dim() {
            return Err(PanError::Format(format!("parameter shape {rows}x{cols}, expected {:?}", p.dim())));
        }
        for v in p.iter_mut() {
            *v = r.f64()?;
        }
    }
    r.done()?;
    model.label_norm = meta.label_norm;
    model.input_norm = meta.input_norm;
    Ok(Checkpoint {
        model,
        split: meta.split,
    })
}

pub fn save_checkpoint(model: &Model, split: Option<SplitSpec>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(model, split)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(PanError::MissingFile(path.to_path_buf()));
    }
    checkpoint_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// experiments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// PANDS1 file.
    pub path: Option<PathBuf>,
    /// TU directory and dataset name, used when `path` is absent.
    pub tu_dir: Option<PathBuf>,
    pub tu_name: Option<String>,
    pub standardize_attributes: bool,
    pub split: [f64; 3],
    /// Defaults to the optimizer seed.
    pub split_seed: Option<u64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: None,
            tu_dir: None,
            tu_name: None,
            standardize_attributes: false,
            split: [0.8, 0.1, 0.1],
            split_seed: None,
        }
    }
}

impl DatasetConfig {
    pub fn load(&self) -> Result<Dataset> {
        match (&self.path, &self.tu_dir, &self.tu_name) {
            (Some(p), _, _) => load_dataset(p),
            (None, Some(dir), Some(name)) => parse_tu_dataset_with(
                dir,
                name,
                TuOptions {
                    standardize_attributes: self.standardize_attributes,
                },
            ),
            _ => Err(PanError::Config("dataset needs `path` or both `tu_dir` and `tu_name`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `report.json`, `metrics.csv` and `checkpoint.panck`; nothing is written when absent.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub optim: OptimConfig,
    pub output: OutputConfig,
}

/// Sets `a.b.c = value` in a JSON tree. `value` is parsed as JSON, falling back to a string.
pub fn apply_override(tree: &mut serde_json::Value, key: &str, value: &str) -> Result<()> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| PanError::Config(format!("override '{key}': '{part}' is not inside a table")))?;
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(PanError::Config(format!("empty override key '{key}'")))
}

impl ExperimentConfig {
    /// Reads a TOML or JSON file (by extension), applies `key=value` overrides, and resolves
    /// relative dataset/output paths against the config file's directory.
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        if !path.exists() {
            return Err(PanError::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        let mut tree: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| PanError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| PanError::Config(format!("{}: {e}", path.display())))?
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| PanError::Config(format!("override '{o}' is not key=value")))?;
            apply_override(&mut tree, k.trim(), v.trim())?;
        }
        let mut cfg: Self = serde_json::from_value(tree).map_err(|e| PanError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        resolve(&mut cfg.dataset.path);
        resolve(&mut cfg.dataset.tu_dir);
        resolve(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optim.validate()?;
        self.split_spec().map(|_| ())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let [a, b, c] = self.dataset.split;
        SplitSpec::new(a, b, c, self.dataset.split_seed.unwrap_or(self.optim.seed))
            .map_err(|e| PanError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset: String,
    pub task: Task,
    /// `accuracy` or `mae`.
    pub metric: String,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub test_metric: f64,
    pub test_n: usize,
    /// `exp(theta)` per conv layer (one entry when theta is shared).
    pub series_weights: Vec<Vec<f64>>,
    pub num_parameters: usize,
    pub wall_time_s: f64,
}

impl RunReport {
    /// Per-epoch metrics as CSV. Contains no timing, so it is byte-identical across equal runs.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_metric\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_metric));
        }
        s
    }
}

/// Outcome of [`train_model`]: the best-validation model and its history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Per-feature mean and standard deviation over all nodes of the given graphs (std 1 when constant).
pub fn fit_input_norm(ds: &Dataset, idx: &[usize]) -> Vec<(f64, f64)> {
    let d = ds.feature_dim;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let mut n = 0usize;
    for &i in idx {
        for row in ds.graphs[i].features().rows() {
            for (j, &v) in row.iter().enumerate() {
                sum[j] += v;
                sq[j] += v * v;
            }
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    (0..d)
        .map(|j| {
            let mean = sum[j] / n;
            let var = (sq[j] / n - mean * mean).max(0.0);
            (mean, if var > 1e-24 { var.sqrt() } else { 1.0 })
        })
        .collect()
}

fn better(task: Task, candidate: f64, best: f64) -> bool {
    match task {
        Task::Classify(_) => candidate > best,
        Task::Regress => candidate < best,
    }
}

/// Trains from scratch on `split.train`, keeping the parameters with the best validation metric
/// (earliest on ties). With an empty validation set the final epoch is kept.
pub fn train_model(ds: &Dataset, split: &Split, model_cfg: &ModelConfig, optim: &OptimConfig) -> Result<TrainOutcome> {
    optim.validate()?;
    let mut model = build_model(model_cfg, ds.feature_dim, ds.task, optim.seed)?;
    if ds.task == Task::Regress {
        let ys: Vec<f64> = split.train.iter().map(|&i| ds.graphs[i].label().value()).collect();
        model.label_norm = LabelNorm::fit(&ys);
    }
    if model_cfg.standardize_inputs {
        model.input_norm = Some(fit_input_norm(ds, &split.train));
    }
    let mut state = AdamState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(optim.seed);
    let mut epochs = Vec::with_capacity(optim.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    for epoch in 1..=optim.epochs {
        let train_loss = train_epoch(&mut model, ds, &split.train, &mut state, optim, &mut rng)?;
        let val = evaluate(&model, ds, &split.val)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_metric: val.metric,
        });
        let improve = match &best {
            None => true,
            Some((b, _, _)) => split.val.is_empty() || better(ds.task, val.metric, *b),
        };
        if improve {
            best = Some((val.metric, epoch, model.params.clone()));
        }
    }
    let best_epoch = match best {
        Some((_, e, params)) => {
            model.params = params;
            e
        }
        None => 0,
    };
    Ok(TrainOutcome {
        model,
        epochs,
        best_epoch,
    })
}

/// Full protocol: load data, split, train, pick the best-validation parameters, test, and
/// write report, metrics CSV and checkpoint when an output directory is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    run_experiment_on(cfg, &ds)
}

/// [`run_experiment`] on an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = cfg.split_spec()?;
    let split = split_dataset(ds, &spec)?;
    let out = train_model(ds, &split, &cfg.model, &cfg.optim)?;
    let test = evaluate(&out.model, ds, &split.test)?;
    let report = RunReport {
        config: cfg.clone(),
        dataset: ds.name.clone(),
        task: ds.task,
        metric: match ds.task {
            Task::Classify(_) => "accuracy".into(),
            Task::Regress => "mae".into(),
        },
        epochs: out.epochs,
        best_epoch: out.best_epoch,
        test_metric: test.metric,
        test_n: test.n,
        series_weights: out.model.series_weights(),
        num_parameters: out.model.num_parameters(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output.dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        fs::write(dir.join("metrics.csv"), report.metrics_csv())?;
        save_checkpoint(&out.model, Some(spec), &dir.join("checkpoint.panck"))?;
    }
    Ok(report)
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
