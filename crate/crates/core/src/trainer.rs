//! Classical heads trained on quantum feature maps or raw images.
//!
//! Both models end in a two-logit softmax layer trained with cross-entropy
//! and Adam. The reward used by the search is the best validation AUC seen
//! over the training epochs.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::EncodingCircuit;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::features::{self, FeatureCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            batch: 32,
            epochs: 30,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch == 0 {
            return Err(Error::Config("lr must be positive and batch non-zero".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("invalid Adam moments".into()));
        }
        Ok(())
    }
}

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Two-class model with a flat parameter vector.
pub trait Classifier {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn logits(&self, x: &[f64]) -> [f64; 2];
    /// Adds `d loss / d params` for one sample into `grad` and returns the loss.
    fn accumulate_grad(&self, x: &[f64], label: u8, grad: &mut [f64]) -> f64;

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

/// `-log softmax(z)[label]` and `softmax(z) - onehot(label)`.
fn softmax_xent(z: [f64; 2], label: u8) -> (f64, [f64; 2]) {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    let p = [(z[0] - lse).exp(), (z[1] - lse).exp()];
    let y = label as usize;
    let mut d = p;
    d[y] -= 1.0;
    (lse - z[y], d)
}

/// Probability of class 1.
pub fn positive_prob(z: [f64; 2]) -> f64 {
    1.0 / (1.0 + (z[0] - z[1]).exp())
}

/// Fully connected layer `in_features -> 2`.
///
/// Layout: `w[i * 2 + c]` for input `i` and class `c`, then the two biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    in_features: usize,
    params: Vec<f64>,
}

impl DenseHead {
    /// Uniform init in `[-1/sqrt(in), 1/sqrt(in)]` for weights and biases.
    pub fn new<R: Rng>(in_features: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        let params = (0..(in_features + 1) * 2)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        DenseHead {
            in_features,
            params,
        }
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    fn forward(params: &[f64], x: &[f64]) -> [f64; 2] {
        let n = x.len();
        let mut z = [params[2 * n], params[2 * n + 1]];
        for (i, &xi) in x.iter().enumerate() {
            z[0] += params[2 * i] * xi;
            z[1] += params[2 * i + 1] * xi;
        }
        z
    }

    /// Backward pass; returns `d loss / d x` when `want_input_grad`.
    fn backward(params: &[f64], x: &[f64], d: [f64; 2], grad: &mut [f64], input_grad: Option<&mut [f64]>) {
        let n = x.len();
        for (i, &xi) in x.iter().enumerate() {
            grad[2 * i] += d[0] * xi;
            grad[2 * i + 1] += d[1] * xi;
        }
        grad[2 * n] += d[0];
        grad[2 * n + 1] += d[1];
        if let Some(gx) = input_grad {
            for i in 0..n {
                gx[i] = params[2 * i] * d[0] + params[2 * i + 1] * d[1];
            }
        }
    }
}

impl Classifier for DenseHead {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, x: &[f64]) -> [f64; 2] {
        DenseHead::forward(&self.params, x)
    }

    fn accumulate_grad(&self, x: &[f64], label: u8, grad: &mut [f64]) -> f64 {
        let (loss, d) = softmax_xent(self.logits(x), label);
        DenseHead::backward(&self.params, x, d, grad, None);
        loss
    }
}

pub const CONV_FILTERS: usize = 4;
pub const CONV_KERNEL: usize = 2;

/// One 2x2 stride-2 convolution with 4 filters, ReLU, then a [`DenseHead`]
/// over the `4 x H/2 x W/2` activations (channel-major).
///
/// Layout: filter `f` weights at `f * 4 .. f * 4 + 4` (row-major kernel),
/// 4 filter biases, then the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBaseline {
    height: usize,
    width: usize,
    params: Vec<f64>,
}

const CONV_PARAMS: usize = CONV_FILTERS * CONV_KERNEL * CONV_KERNEL + CONV_FILTERS;

impl ConvBaseline {
    pub fn new<R: Rng>(height: usize, width: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((CONV_KERNEL * CONV_KERNEL) as f64).sqrt();
        let mut params: Vec<f64> = (0..CONV_PARAMS)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let (gh, gw) = (height / CONV_KERNEL, width / CONV_KERNEL);
        let head = DenseHead::new(CONV_FILTERS * gh * gw, rng);
        params.extend_from_slice(head.params());
        ConvBaseline {
            height,
            width,
            params,
        }
    }

    pub fn extra_params(&self) -> usize {
        CONV_PARAMS
    }

    fn grid(&self) -> (usize, usize) {
        (self.height / CONV_KERNEL, self.width / CONV_KERNEL)
    }

    /// Pre-activations, channel-major.
    fn conv(&self, x: &[f64]) -> Vec<f64> {
        let (gh, gw) = self.grid();
        let mut out = vec![0.0; CONV_FILTERS * gh * gw];
        for f in 0..CONV_FILTERS {
            let w = &self.params[f * 4..f * 4 + 4];
            let b = self.params[CONV_FILTERS * 4 + f];
            for r in 0..gh {
                for c in 0..gw {
                    let base = 2 * r * self.width + 2 * c;
                    out[(f * gh + r) * gw + c] = b
                        + w[0] * x[base]
                        + w[1] * x[base + 1]
                        + w[2] * x[base + self.width]
                        + w[3] * x[base + self.width + 1];
                }
            }
        }
        out
    }
}

impl Classifier for ConvBaseline {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, x: &[f64]) -> [f64; 2] {
        let act: Vec<f64> = self.conv(x).into_iter().map(|v| v.max(0.0)).collect();
        DenseHead::forward(&self.params[CONV_PARAMS..], &act)
    }

    fn accumulate_grad(&self, x: &[f64], label: u8, grad: &mut [f64]) -> f64 {
        let pre = self.conv(x);
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let head = &self.params[CONV_PARAMS..];
        let (loss, d) = softmax_xent(DenseHead::forward(head, &act), label);
        let mut d_act = vec![0.0; act.len()];
        let (conv_grad, head_grad) = grad.split_at_mut(CONV_PARAMS);
        DenseHead::backward(head, &act, d, head_grad, Some(&mut d_act));

        let (gh, gw) = self.grid();
        for f in 0..CONV_FILTERS {
            for r in 0..gh {
                for c in 0..gw {
                    let o = (f * gh + r) * gw + c;
                    if pre[o] <= 0.0 {
                        continue;
                    }
                    let g = d_act[o];
                    let base = 2 * r * self.width + 2 * c;
                    conv_grad[f * 4] += g * x[base];
                    conv_grad[f * 4 + 1] += g * x[base + 1];
                    conv_grad[f * 4 + 2] += g * x[base + self.width];
                    conv_grad[f * 4 + 3] += g * x[base + self.width + 1];
                    conv_grad[CONV_FILTERS * 4 + f] += g;
                }
            }
        }
        loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Dense head over the flat input vector.
    Dense,
    /// Convolution baseline over a raw `height x width` image.
    Conv { height: usize, width: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn from_dataset(ds: &Dataset) -> Self {
        SplitIndices {
            train: ds.indices(Split::Train),
            val: ds.indices(Split::Val),
            test: ds.indices(Split::Test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: f64,
    /// `None` when the split holds a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train: SplitMetrics,
    pub val: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_val_auc: f64,
    /// 1-based epoch of `best_val_auc`, or 0 when no epoch ran.
    pub best_epoch: usize,
    /// Test metrics of the parameters from `best_epoch`.
    pub test: Option<SplitMetrics>,
}

impl EvalReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "epoch",
            "train_loss",
            "train_acc",
            "train_auc",
            "val_loss",
            "val_acc",
            "val_auc",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for e in &self.epochs {
            wtr.write_record([
                e.epoch.to_string(),
                e.train.loss.to_string(),
                e.train.accuracy.to_string(),
                opt(e.train.auc),
                e.val.loss.to_string(),
                e.val.accuracy.to_string(),
                opt(e.val.auc),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mann-Whitney AUC with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Data("scores and labels differ in length".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks doubled so that midranks stay integral
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u64;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                pos_rank_sum2 += midrank2;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}

fn evaluate<M: Classifier>(model: &M, inputs: &[Vec<f64>], labels: &[u8], idx: &[usize]) -> SplitMetrics {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut scores = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &i in idx {
        let z = model.logits(&inputs[i]);
        let (l, _) = softmax_xent(z, labels[i]);
        loss += l;
        let pred = u8::from(z[1] > z[0]);
        correct += usize::from(pred == labels[i]);
        scores.push(positive_prob(z));
        ys.push(labels[i]);
    }
    let n = idx.len().max(1) as f64;
    SplitMetrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
        auc: auc(&scores, &ys).ok(),
    }
}

fn has_both_classes(labels: &[u8], idx: &[usize]) -> bool {
    let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
    pos > 0 && pos < idx.len()
}

/// Trains a fresh model and tracks per-epoch metrics.
///
/// Initialization and shuffling draw from separate ChaCha streams of
/// `cfg.seed`, so a fixed seed reproduces the report bit for bit.
pub fn train(
    inputs: &[Vec<f64>],
    labels: &[u8],
    split: &SplitIndices,
    model: ModelKind,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if inputs.len() != labels.len() {
        return Err(Error::Data("inputs and labels differ in length".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("label {l} outside {{0,1}}")));
    }
    if !has_both_classes(labels, &split.val) {
        return Err(Error::SingleClassValidation);
    }
    if split.train.is_empty() && cfg.epochs > 0 {
        return Err(Error::Data("training split is empty".into()));
    }
    let dim = inputs.first().map_or(0, |x| x.len());
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::Data("inputs have mixed lengths".into()));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match model {
        ModelKind::Dense => {
            let m = DenseHead::new(dim, &mut init_rng);
            fit(m, inputs, labels, split, cfg)
        }
        ModelKind::Conv { height, width } => {
            if height * width != dim || height < CONV_KERNEL || width < CONV_KERNEL {
                return Err(Error::Config(format!(
                    "conv baseline expects {height}x{width} images, inputs have {dim} values"
                )));
            }
            let m = ConvBaseline::new(height, width, &mut init_rng);
            fit(m, inputs, labels, split, cfg)
        }
    }
}

fn fit<M: Classifier + Clone>(
    mut model: M,
    inputs: &[Vec<f64>],
    labels: &[u8],
    split: &SplitIndices,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut opt = Adam::new(model.num_params(), cfg);
    let mut grad = vec![0.0; model.num_params()];
    let mut order = split.train.clone();

    let chance = |m: &SplitMetrics| m.auc.unwrap_or(0.5);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, M)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += model.accumulate_grad(&inputs[i], labels[i], &mut grad);
            }
            if !loss.is_finite() {
                return Err(Error::NanLoss { epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(model.params_mut(), &grad);
        }
        let train_m = evaluate(&model, inputs, labels, &split.train);
        let val_m = evaluate(&model, inputs, labels, &split.val);
        if !train_m.loss.is_finite() || !val_m.loss.is_finite() {
            return Err(Error::NanLoss { epoch });
        }
        let val_auc = chance(&val_m);
        if best.as_ref().is_none_or(|(b, _, _)| val_auc > *b) {
            best = Some((val_auc, epoch, model.clone()));
        }
        epochs.push(EpochMetrics {
            epoch,
            train: train_m,
            val: val_m,
        });
    }

    let (best_val_auc, best_epoch, best_model) = match best {
        Some(b) => b,
        None => {
            let val = evaluate(&model, inputs, labels, &split.val);
            (chance(&val), 0, model)
        }
    };
    let test = (!split.test.is_empty()).then(|| evaluate(&best_model, inputs, labels, &split.test));
    Ok(EvalReport {
        epochs,
        best_val_auc,
        best_epoch,
        test,
    })
}

/// Flattened `C x H x W` features for every image in the dataset.
pub fn circuit_inputs(
    ds: &Dataset,
    circuit: &EncodingCircuit,
    k: usize,
    cache: Option<(&FeatureCache, u64)>,
) -> Result<std::sync::Arc<Vec<Vec<f64>>>> {
    match cache {
        Some((cache, key)) => cache.get_or_extract(&ds.images, key, circuit, k),
        None => Ok(std::sync::Arc::new(
            features::extract_all(&ds.images, circuit, k)?
                .into_iter()
                .map(|m| m.values)
                .collect(),
        )),
    }
}

pub fn raw_inputs(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.images.iter().map(|img| img.pixels.clone()).collect()
}

/// Trains the dense head on the circuit's feature maps.
pub fn evaluate_circuit(
    ds: &Dataset,
    circuit: &EncodingCircuit,
    k: usize,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    let inputs = circuit_inputs(ds, circuit, k, None)?;
    train(&inputs, &ds.labels, &SplitIndices::from_dataset(ds), ModelKind::Dense, cfg)
}

/// `lo, lo + step, ..., hi`, rounded to 10 decimals to absorb drift.
pub fn scale_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::Config(format!("bad scale grid {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_scale: f64,
    pub table: Vec<(f64, EvalReport)>,
}

/// Retrains at every scale in `grid`; ties go to the smaller scale.
pub fn sweep_scale(
    circuit: &EncodingCircuit,
    ds: &Dataset,
    k: usize,
    grid: &[f64],
    cfg: &TrainConfig,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("scale grid is empty".into()));
    }
    let mut table = Vec::with_capacity(grid.len());
    for &f in grid {
        let c = circuit.clone().with_scale(f);
        table.push((f, evaluate_circuit(ds, &c, k, cfg)?));
    }
    let mut best = 0;
    for (i, (f, r)) in table.iter().enumerate() {
        let (bf, br) = &table[best];
        if r.best_val_auc > br.best_val_auc || (r.best_val_auc == br.best_val_auc && f < bf) {
            best = i;
        }
    }
    Ok(SweepResult {
        best_scale: table[best].0,
        table,
    })
}
