//! Monte Carlo Tree Search over circuit edits.
//!
//! Every tree node holds a candidate circuit that was evaluated once when it
//! was created. An iteration walks down from the root by UCB1 until it
//! reaches a node whose child count is below the progressive-widening limit
//! `max(1, floor(k N^alpha))`, samples a fresh edit there, evaluates the
//! resulting circuit, and adds the reward along the path.
//!
//! With `jobs > 1` up to `jobs` leaves are selected per batch. Visits are
//! added when a leaf is selected, so later selections in the same batch see
//! in-flight paths as visited with zero reward; rewards are then applied in
//! selection order. `jobs = 1` is the reference schedule.

use std::io::{BufRead, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Action, EncodingCircuit, Gate, GateKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{self, FeatureCache};
use crate::metrics::{self, ErankReport, PairRecord, SamplerConfig};
use crate::trainer::{self, ModelKind, SplitIndices, TrainConfig};

/// Reward given to candidates rejected by the effective-rank prefilter.
pub const CHANCE_REWARD: f64 = 0.5;

pub const DEFAULT_ERANK_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionProbs {
    pub add: f64,
    pub remove: f64,
    pub replace: f64,
}

impl ActionProbs {
    pub const ADD_ONLY: ActionProbs = ActionProbs {
        add: 1.0,
        remove: 0.0,
        replace: 0.0,
    };
    pub const GROWING: ActionProbs = ActionProbs {
        add: 0.40,
        remove: 0.15,
        replace: 0.45,
    };
    pub const FULL: ActionProbs = ActionProbs {
        add: 0.0,
        remove: 0.50,
        replace: 0.50,
    };

    fn is_distribution(&self) -> bool {
        let parts = [self.add, self.remove, self.replace];
        parts.iter().all(|p| (0.0..=1.0).contains(p)) && (parts.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilteredMode {
    /// Rejected candidates stay in the tree and back up [`CHANCE_REWARD`].
    ChanceReward,
    /// Rejected candidates are dropped and leave the tree statistics alone.
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub patch: usize,
    pub exploration: f64,
    pub pw_k: f64,
    pub pw_alpha: f64,
    pub max_iterations: usize,
    /// Probabilities below `min_gates`, between the bounds, and at `max_gates`.
    pub phase_probs: [ActionProbs; 3],
    /// Defaults to `2 n`.
    pub min_gates: Option<usize>,
    /// Defaults to `5 n`.
    pub max_gates: Option<usize>,
    pub scale: f64,
    pub erank_filter: Option<f64>,
    pub filtered_mode: FilteredMode,
    /// Compute the effective rank of every candidate even without a filter.
    pub log_erank: bool,
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            patch: 2,
            exploration: 0.4,
            pw_k: 1.0,
            pw_alpha: 0.3,
            max_iterations: 100,
            phase_probs: [ActionProbs::ADD_ONLY, ActionProbs::GROWING, ActionProbs::FULL],
            min_gates: None,
            max_gates: None,
            scale: 1.0,
            erank_filter: None,
            filtered_mode: FilteredMode::ChanceReward,
            log_erank: false,
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

impl SearchConfig {
    pub fn n_qubits(&self) -> usize {
        self.patch * self.patch
    }

    pub fn min_gates(&self) -> usize {
        self.min_gates.unwrap_or(2 * self.n_qubits())
    }

    pub fn max_gates(&self) -> usize {
        self.max_gates
            .unwrap_or(crate::circuit::MAX_GATES_PER_QUBIT * self.n_qubits())
    }

    pub fn validate(&self) -> Result<()> {
        features::check_patch_size(self.patch)?;
        let n = self.n_qubits();
        if self.max_gates() < n.max(1) || self.min_gates() > self.max_gates() {
            return Err(Error::Config(format!(
                "need n <= max_gates and min_gates <= max_gates (n={n}, min={}, max={})",
                self.min_gates(),
                self.max_gates()
            )));
        }
        if !self.phase_probs.iter().all(ActionProbs::is_distribution) {
            return Err(Error::Config("phase action probabilities must each sum to 1".into()));
        }
        if self.phase_probs[2].add != 0.0 {
            return Err(Error::Config("add actions are not possible at max_gates".into()));
        }
        if !(self.exploration >= 0.0) || !(self.pw_k > 0.0) || !(self.pw_alpha >= 0.0) {
            return Err(Error::Config("exploration, pw_k and pw_alpha must be non-negative".into()));
        }
        if let Some(t) = self.erank_filter {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("erank threshold {t} outside [0, 1]")));
            }
        }
        if !self.scale.is_finite() {
            return Err(Error::Config("scale must be finite".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Initial circuit: one `RX` per qubit.
    pub fn root_circuit(&self) -> EncodingCircuit {
        EncodingCircuit::rx_layer(self.n_qubits())
            .with_scale(self.scale)
            .with_max_gates(self.max_gates())
    }
}

/// `Q(s,a) + c sqrt(ln N(s) / N(s,a))`, infinite for unvisited edges.
pub fn ucb1(mean_reward: f64, parent_visits: u64, edge_visits: u64, c: f64) -> f64 {
    if edge_visits == 0 {
        return f64::INFINITY;
    }
    mean_reward + c * ((parent_visits as f64).ln() / edge_visits as f64).sqrt()
}

/// `max(1, floor(k N^alpha))`.
pub fn widening_limit(visits: u64, k: f64, alpha: f64) -> usize {
    let raw = k * (visits as f64).powf(alpha);
    ((raw + 1e-9).floor() as usize).max(1)
}

fn sample_gate<R: Rng>(n: usize, rng: &mut R) -> Gate {
    let kind = GateKind::ALL[rng.random_range(0..GateKind::ALL.len())];
    if kind.num_qubits() == 1 || n < 2 {
        let kind = if n < 2 && kind.num_qubits() == 2 { GateKind::RX } else { kind };
        Gate::wired(kind, &[rng.random_range(0..n)])
    } else {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        Gate::wired(kind, &[a, b])
    }
}

/// Draws an edit according to the size-dependent phase probabilities.
pub fn sample_action<R: Rng>(circuit: &EncodingCircuit, config: &SearchConfig, rng: &mut R) -> Action {
    let len = circuit.len();
    let n = circuit.n_qubits;
    let max_gates = circuit.max_gates;
    let probs = if len < config.min_gates() {
        config.phase_probs[0]
    } else if len >= max_gates {
        config.phase_probs[2]
    } else {
        config.phase_probs[1]
    };
    let u: f64 = rng.random();
    let add = len == 0 || (len < max_gates && u < probs.add);
    if add {
        return Action::Add {
            gate: sample_gate(n, rng),
            position: rng.random_range(0..=len),
        };
    }
    let position = rng.random_range(0..len);
    let remove_share = probs.remove / (probs.remove + probs.replace).max(f64::MIN_POSITIVE);
    let v = if len < max_gates {
        (u - probs.add) / (1.0 - probs.add)
    } else {
        u
    };
    if v < remove_share {
        Action::Remove { position }
    } else {
        let current = &circuit.gates[position];
        let mut gate = sample_gate(n, rng);
        while &gate == current {
            gate = sample_gate(n, rng);
        }
        Action::Replace { position, gate }
    }
}

/// Scores candidate circuits for the search.
pub trait Evaluator: Sync {
    /// Reward in `[0, 1]`.
    fn reward(&self, circuit: &EncodingCircuit) -> Result<f64>;

    /// Mean normalized effective rank of the circuit's feature maps.
    fn erank(&self, _circuit: &EncodingCircuit) -> Result<ErankReport> {
        Err(Error::Config("this evaluator does not compute effective rank".into()))
    }
}

/// Trains the dense head on the candidate's features and returns the best
/// validation AUC; effective rank uses a brightness-balanced training sample.
pub struct QccnnEvaluator<'a> {
    dataset: &'a Dataset,
    patch: usize,
    train: TrainConfig,
    split: SplitIndices,
    images_key: u64,
    erank_images: Vec<features::Image>,
    cache: FeatureCache,
}

impl<'a> QccnnEvaluator<'a> {
    pub fn new(dataset: &'a Dataset, patch: usize, train: TrainConfig, sampler: &SamplerConfig) -> Result<Self> {
        features::check_patch_size(patch)?;
        let split = SplitIndices::from_dataset(dataset);
        if split.train.is_empty() || split.val.is_empty() {
            return Err(Error::Data("search needs non-empty train and val splits".into()));
        }
        let erank_images = crate::data::balanced_sample(dataset, sampler.per_class, sampler.seed)?
            .into_iter()
            .map(|i| dataset.images[i].clone())
            .collect();
        Ok(QccnnEvaluator {
            dataset,
            patch,
            train,
            split,
            images_key: features::images_fingerprint(&dataset.images),
            erank_images,
            cache: FeatureCache::new(),
        })
    }
}

impl Evaluator for QccnnEvaluator<'_> {
    fn reward(&self, circuit: &EncodingCircuit) -> Result<f64> {
        let inputs = trainer::circuit_inputs(self.dataset, circuit, self.patch, Some((&self.cache, self.images_key)))?;
        let report = trainer::train(&inputs, &self.dataset.labels, &self.split, ModelKind::Dense, &self.train)?;
        Ok(report.best_val_auc)
    }

    fn erank(&self, circuit: &EncodingCircuit) -> Result<ErankReport> {
        metrics::erank_of_images(circuit, &self.erank_images, self.patch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prefilter {
    Pass,
    Reject,
}

/// Rejects iff the mean normalized effective rank is below `threshold`.
pub fn erank_prefilter(report: &ErankReport, threshold: f64) -> Prefilter {
    if report.mean < threshold {
        Prefilter::Reject
    } else {
        Prefilter::Pass
    }
}

/// [`erank_prefilter`] on a dataset's balanced sample.
pub fn erank_prefilter_dataset(
    circuit: &EncodingCircuit,
    ds: &Dataset,
    patch: usize,
    sampler: &SamplerConfig,
    threshold: f64,
) -> Result<(Prefilter, ErankReport)> {
    let report = metrics::mean_erank(circuit, ds, patch, sampler)?;
    Ok((erank_prefilter(&report, threshold), report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub action: Option<Action>,
    pub circuit: EncodingCircuit,
    /// `N(s)`; equals `N(parent, action)` for the incoming edge.
    pub visits: u64,
    /// Summed reward of this subtree; `W(parent, action)`.
    pub total_reward: f64,
    /// Own evaluation reward (chance level for filtered nodes).
    pub reward: Option<f64>,
    pub filtered: bool,
    /// Dropped from the tree (rejected under [`FilteredMode::Discard`]).
    pub detached: bool,
    #[serde(skip)]
    pub children: Vec<usize>,
}

impl SearchNode {
    pub fn mean_reward(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total_reward / self.visits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    pub circuit_id: usize,
    pub parent_id: Option<usize>,
    pub action: Option<String>,
    pub n_gates: usize,
    pub circuit: String,
    /// Best validation AUC from training; absent for filtered candidates.
    pub reward: Option<f64>,
    pub erank_mean: Option<f64>,
    pub erank_std: Option<f64>,
    pub filtered: bool,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub records: Vec<LogRecord>,
}

impl SearchLog {
    /// Index of the highest-reward evaluated record; earliest wins ties.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.records.iter().enumerate() {
            if let Some(v) = r.reward {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Best trained reward after each record.
    pub fn best_so_far(&self) -> Vec<Option<f64>> {
        let mut cur: Option<f64> = None;
        self.records
            .iter()
            .map(|r| {
                if let Some(v) = r.reward {
                    cur = Some(cur.map_or(v, |c| c.max(v)));
                }
                cur
            })
            .collect()
    }

    pub fn filtered_count(&self) -> usize {
        self.records.iter().filter(|r| r.filtered).count()
    }

    /// Records with both a trained reward and an effective rank.
    pub fn pairs(&self) -> Vec<PairRecord> {
        self.records
            .iter()
            .filter_map(|r| {
                Some(PairRecord {
                    circuit_id: r.circuit_id as u64,
                    erank_mean: r.erank_mean?,
                    erank_std: r.erank_std?,
                    val_auc: r.reward?,
                })
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(SearchLog { records })
    }

    pub fn write_timings_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["iteration", "circuit_id", "filtered", "wall_ms"])?;
        for r in &self.records {
            wtr.write_record([
                r.iteration.to_string(),
                r.circuit_id.to_string(),
                r.filtered.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Serializable search state; the tree is stored as parent-pointer records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: SearchConfig,
    pub iterations: usize,
    pub nodes: Vec<SearchNode>,
    pub log: SearchLog,
    /// ChaCha word position, as a decimal string.
    pub rng_word_pos: String,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: EncodingCircuit,
    pub best_reward: f64,
    pub log: SearchLog,
}

struct Pending {
    node: usize,
    path: Vec<usize>,
    iteration: usize,
}

struct Evaluated {
    reward: f64,
    trained: bool,
    erank: Option<ErankReport>,
    filtered: bool,
    wall_ms: f64,
}

pub struct Search<'e, E: Evaluator> {
    config: SearchConfig,
    evaluator: &'e E,
    nodes: Vec<SearchNode>,
    log: SearchLog,
    rng: ChaCha8Rng,
    iterations: usize,
}

impl<'e, E: Evaluator> Search<'e, E> {
    pub fn new(config: SearchConfig, evaluator: &'e E) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Search {
            config,
            evaluator,
            nodes: Vec::new(),
            log: SearchLog::default(),
            rng,
            iterations: 0,
        })
    }

    pub fn resume(checkpoint: Checkpoint, evaluator: &'e E) -> Result<Self> {
        checkpoint.config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(checkpoint.config.seed);
        let pos: u128 = checkpoint
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Data("bad rng position in checkpoint".into()))?;
        rng.set_word_pos(pos);
        let mut nodes = checkpoint.nodes;
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::Data("checkpoint node ids are not contiguous".into()));
            }
        }
        for i in 0..nodes.len() {
            nodes[i].children.clear();
        }
        for i in 0..nodes.len() {
            if let (Some(p), false) = (nodes[i].parent, nodes[i].detached) {
                if p >= i {
                    return Err(Error::Data("checkpoint parent points forward".into()));
                }
                nodes[p].children.push(i);
            }
        }
        Ok(Search {
            config: checkpoint.config,
            evaluator,
            nodes,
            log: checkpoint.log,
            rng,
            iterations: checkpoint.iterations,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            iterations: self.iterations,
            nodes: self.nodes.clone(),
            log: self.log.clone(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn log(&self) -> &SearchLog {
        &self.log
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn root(&self) -> Option<&SearchNode> {
        self.nodes.first()
    }

    /// Runs until `config.max_iterations` iterations have completed.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.max_iterations)
    }

    pub fn run_until(&mut self, iterations: usize) -> Result<()> {
        while self.iterations < iterations {
            let batch = self.config.jobs.min(iterations - self.iterations);
            self.step(batch)?;
        }
        Ok(())
    }

    /// Runs one batch of up to `batch` iterations.
    pub fn step(&mut self, batch: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return self.evaluate_root();
        }
        let pending: Vec<Pending> = (0..batch.max(1))
            .map(|j| self.select_and_expand(self.iterations + j))
            .collect();
        let results: Vec<Result<Evaluated>> = if pending.len() == 1 {
            vec![self.evaluate(&self.nodes[pending[0].node].circuit, true)]
        } else {
            let circuits: Vec<&EncodingCircuit> = pending.iter().map(|p| &self.nodes[p.node].circuit).collect();
            circuits.par_iter().map(|c| self.evaluate(c, true)).collect()
        };
        for (p, res) in pending.into_iter().zip(results) {
            let ev = res.map_err(|e| Error::Search {
                iteration: p.iteration,
                source: Box::new(e),
            })?;
            self.finish(p, ev);
        }
        Ok(())
    }

    fn evaluate_root(&mut self) -> Result<()> {
        let circuit = self.config.root_circuit();
        let ev = self.evaluate(&circuit, false).map_err(|e| Error::Search {
            iteration: 0,
            source: Box::new(e),
        })?;
        self.nodes.push(SearchNode {
            id: 0,
            parent: None,
            action: None,
            circuit,
            visits: 1,
            total_reward: 0.0,
            reward: None,
            filtered: false,
            detached: false,
            children: Vec::new(),
        });
        self.finish(
            Pending {
                node: 0,
                path: Vec::new(),
                iteration: 0,
            },
            ev,
        );
        Ok(())
    }

    fn evaluate(&self, circuit: &EncodingCircuit, filterable: bool) -> Result<Evaluated> {
        let start = Instant::now();
        let erank = if self.config.erank_filter.is_some() || self.config.log_erank {
            Some(self.evaluator.erank(circuit)?)
        } else {
            None
        };
        let rejected = match (filterable, self.config.erank_filter, &erank) {
            (true, Some(t), Some(r)) => erank_prefilter(r, t) == Prefilter::Reject,
            _ => false,
        };
        let (reward, trained) = if rejected {
            (CHANCE_REWARD, false)
        } else {
            let r = self.evaluator.reward(circuit)?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("reward {r} outside [0, 1]")));
            }
            (r, true)
        };
        Ok(Evaluated {
            reward,
            trained,
            erank,
            filtered: rejected,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Descends by UCB1, adds one child where widening allows, and marks the
    /// path (including the new child) as visited.
    fn select_and_expand(&mut self, iteration: usize) -> Pending {
        let c = self.config.exploration;
        let mut path = vec![0usize];
        let mut node = 0usize;
        loop {
            let n = &self.nodes[node];
            let limit = widening_limit(n.visits, self.config.pw_k, self.config.pw_alpha);
            if n.children.len() < limit {
                if let Some(action) = self.fresh_action(node) {
                    let child = self.add_child(node, action);
                    path.push(child);
                    break;
                }
            }
            if self.nodes[node].children.is_empty() {
                // every sampled edit duplicated an existing one; accept the duplicate
                let action = sample_action(&self.nodes[node].circuit, &self.config, &mut self.rng);
                let child = self.add_child(node, action);
                path.push(child);
                break;
            }
            let parent_visits = self.nodes[node].visits;
            let mut best = self.nodes[node].children[0];
            let mut best_score = f64::NEG_INFINITY;
            for &ch in &self.nodes[node].children {
                let cn = &self.nodes[ch];
                let score = ucb1(cn.mean_reward(), parent_visits, cn.visits, c);
                if score > best_score {
                    best_score = score;
                    best = ch;
                }
            }
            node = best;
            path.push(node);
        }
        for &i in &path {
            self.nodes[i].visits += 1;
        }
        let leaf = *path.last().unwrap();
        Pending {
            node: leaf,
            path,
            iteration,
        }
    }

    fn fresh_action(&mut self, node: usize) -> Option<Action> {
        for _ in 0..32 {
            let a = sample_action(&self.nodes[node].circuit, &self.config, &mut self.rng);
            let dup = self.nodes[node]
                .children
                .iter()
                .any(|&ch| self.nodes[ch].action.as_ref() == Some(&a));
            if !dup {
                return Some(a);
            }
        }
        None
    }

    fn add_child(&mut self, parent: usize, action: Action) -> usize {
        let circuit = self.nodes[parent]
            .circuit
            .apply(&action)
            .expect("sampled actions are valid for their circuit");
        let id = self.nodes.len();
        self.nodes.push(SearchNode {
            id,
            parent: Some(parent),
            action: Some(action),
            circuit,
            visits: 0,
            total_reward: 0.0,
            reward: None,
            filtered: false,
            detached: false,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    fn finish(&mut self, p: Pending, ev: Evaluated) {
        let discard = ev.filtered && self.config.filtered_mode == FilteredMode::Discard;
        let leaf = p.node;
        if discard {
            for &i in &p.path {
                self.nodes[i].visits -= 1;
            }
            self.nodes[leaf].detached = true;
            if let Some(parent) = self.nodes[leaf].parent {
                self.nodes[parent].children.retain(|&c| c != leaf);
            }
        } else {
            for &i in &p.path {
                self.nodes[i].total_reward += ev.reward;
            }
            if p.path.is_empty() {
                self.nodes[leaf].total_reward += ev.reward;
            }
        }
        self.nodes[leaf].reward = Some(ev.reward);
        self.nodes[leaf].filtered = ev.filtered;
        let node = &self.nodes[leaf];
        self.log.records.push(LogRecord {
            iteration: p.iteration,
            circuit_id: leaf,
            parent_id: node.parent,
            action: node.action.as_ref().map(|a| a.to_string()),
            n_gates: node.circuit.len(),
            circuit: node.circuit.to_text(),
            reward: ev.trained.then_some(ev.reward),
            erank_mean: ev.erank.as_ref().map(|r| r.mean),
            erank_std: ev.erank.as_ref().map(|r| r.std),
            filtered: ev.filtered,
            wall_ms: ev.wall_ms,
        });
        self.iterations += 1;
    }

    pub fn outcome(&self) -> Option<SearchOutcome> {
        let i = self.log.best_index()?;
        let rec = &self.log.records[i];
        Some(SearchOutcome {
            best: self.nodes[rec.circuit_id].circuit.clone(),
            best_reward: rec.reward.unwrap_or(0.0),
            log: self.log.clone(),
        })
    }
}

/// Runs a full search with the QCCNN reward on `dataset`.
pub fn search(dataset: &Dataset, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let evaluator = QccnnEvaluator::new(dataset, config.patch, config.train.clone(), &config.sampler)?;
    search_with(&evaluator, config)
}

pub fn search_with<E: Evaluator>(evaluator: &E, config: &SearchConfig) -> Result<SearchOutcome> {
    let mut s = Search::new(config.clone(), evaluator)?;
    s.run()?;
    s.outcome()
        .ok_or_else(|| Error::Config("search ran zero iterations".into()))
}
