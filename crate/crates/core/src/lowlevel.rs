//! Parameter policy: one small feedforward network per meta-task mapping the
//! object state to skill parameters, trained by plain gradient descent on the
//! squared error against parameters that succeeded during exploration.

use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::env::{MetaTaskId, ObjectState, SkillId, SkillParams};
use crate::error::{Error, Result};
use crate::highlevel::{format_f64, SelectMode};
use crate::rng::{derive_seed, seeded_rng, Rng};

pub const HIDDEN: [usize; 3] = [32, 64, 32];
pub const OUTPUT_DIM: usize = 2;

/// Network input for an object state: raw features rescaled from [0,1] to [-1,1].
pub fn encode_obs(o: &ObjectState) -> [f64; ObjectState::FEATURE_DIM] {
    o.features().map(|v| 2.0 * v - 1.0)
}

pub fn default_topology() -> Vec<usize> {
    let mut t = vec![ObjectState::FEATURE_DIM];
    t.extend_from_slice(&HIDDEN);
    t.push(OUTPUT_DIM);
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], z: &mut [f64]) {
        for ((zo, row), b) in z.iter_mut().zip(self.weights.chunks_exact(self.inputs)).zip(&self.biases) {
            *zo = b + dot(row, x);
        }
    }
}

/// Dot product with four interleaved partial sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fully connected net, rectifier on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamNet {
    layers: Vec<Dense>,
}

/// Per-layer activations from one forward pass. `acts[0]` is the input.
struct Trace {
    acts: Vec<Vec<f64>>,
}

#[derive(Default)]
struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl ParamNet {
    pub fn zeros(topology: &[usize]) -> Self {
        assert!(topology.len() >= 2, "topology needs input and output sizes");
        ParamNet {
            layers: topology
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Uniform init in `[-s, s]` with zero biases when `init_scale` is given.
    /// Otherwise hidden layers use `s = sqrt(6/fan_in)` and the output layer
    /// starts as the constant map to (0.5, 0.5).
    pub fn random(topology: &[usize], init_scale: Option<f64>, rng: &mut Rng) -> Self {
        let mut net = ParamNet::zeros(topology);
        let last = net.layers.len() - 1;
        for (li, layer) in net.layers.iter_mut().enumerate() {
            if li == last && init_scale.is_none() {
                layer.biases.iter_mut().for_each(|b| *b = 0.5);
                continue;
            }
            let s = init_scale.unwrap_or_else(|| (6.0 / layer.inputs as f64).sqrt());
            for w in &mut layer.weights {
                *w = if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
            }
        }
        net
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.layers[0].inputs];
        t.extend(self.layers.iter().map(|l| l.outputs));
        t
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).acts.pop().unwrap_or_default()
    }

    fn trace(&self, x: &[f64]) -> Trace {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            layer.forward(&acts[i], &mut z);
            if i != last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        Trace { acts }
    }

    /// Squared error `|net(x) - target|^2`.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> f64 {
        self.forward(x)
            .iter()
            .zip(target)
            .map(|(y, t)| (y - t).powi(2))
            .sum()
    }

    /// Adds `scale * dJ/dparams` for one sample into `grad` and returns J.
    fn accumulate(&self, x: &[f64], target: &[f64], scale: f64, grad: &mut ParamNet) -> f64 {
        let trace = self.trace(x);
        let out = trace.acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(y, t)| {
                loss += (y - t).powi(2);
                2.0 * (y - t) * scale
            })
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let g = &mut grad.layers[li];
            let input = &trace.acts[li];
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let base = o * layer.inputs;
                let grow = &mut g.weights[base..base + layer.inputs];
                let wrow = &layer.weights[base..base + layer.inputs];
                for (((g, w), p), a) in grow.iter_mut().zip(wrow).zip(prev.iter_mut()).zip(input) {
                    *g += d * a;
                    *p += w * d;
                }
            }
            if li > 0 {
                // rectifier derivative, taken as 0 at the kink
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        loss
    }

    fn trace_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize_with(self.layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (head, tail) = acts.split_at_mut(i + 1);
            let z = &mut tail[0];
            z.resize(layer.outputs, 0.0);
            layer.forward(&head[i], z);
            if i != last {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    /// One gradient step on a single sample, fused with backprop. Gives the
    /// same result as accumulating into a zeroed gradient and applying it.
    fn sgd_step(&mut self, x: &[f64], target: &[f64], lr: f64, scratch: &mut Scratch) -> f64 {
        self.trace_into(x, &mut scratch.acts);
        let mut loss = 0.0;
        scratch.delta.clear();
        for (y, t) in scratch.acts.last().unwrap().iter().zip(target) {
            loss += (y - t).powi(2);
            scratch.delta.push(2.0 * (y - t));
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[li];
            let input = &scratch.acts[li];
            scratch.prev.clear();
            scratch.prev.resize(layer.inputs, 0.0);
            for (o, &d) in scratch.delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                layer.biases[o] -= lr * d;
                let base = o * layer.inputs;
                let wrow = &mut layer.weights[base..base + layer.inputs];
                for ((w, p), a) in wrow.iter_mut().zip(scratch.prev.iter_mut()).zip(input) {
                    *p += *w * d;
                    *w -= lr * (d * a);
                }
            }
            if li > 0 {
                for (p, a) in scratch.prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.prev);
        }
        loss
    }

    /// Analytic gradient of the squared error for a single sample.
    pub fn gradient(&self, x: &[f64], target: &[f64]) -> ParamNet {
        let mut grad = ParamNet::zeros(&self.topology());
        self.accumulate(x, target, 1.0, &mut grad);
        grad
    }

    fn apply(&mut self, grad: &ParamNet, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.biases.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    fn relu_pattern(&self, x: &[f64]) -> Vec<bool> {
        let trace = self.trace(x);
        let hidden = &trace.acts[1..trace.acts.len() - 1];
        hidden.iter().flatten().map(|&a| a > 0.0).collect()
    }

    pub fn to_text(&self, seed: u64) -> String {
        let mut out = String::new();
        writeln!(out, "skillseq-paramnet 1").unwrap();
        let topo: Vec<String> = self.topology().iter().map(|d| d.to_string()).collect();
        writeln!(out, "topology {}", topo.join(" ")).unwrap();
        writeln!(out, "seed {seed}").unwrap();
        for (i, l) in self.layers.iter().enumerate() {
            writeln!(out, "layer {i}").unwrap();
            for row in l.weights.chunks(l.inputs) {
                writeln!(out, "w {}", join_floats(row)).unwrap();
            }
            writeln!(out, "b {}", join_floats(&l.biases)).unwrap();
        }
        out
    }

    /// Parses a dump produced by [`ParamNet::to_text`]; returns the net and its seed.
    pub fn from_text(text: &str) -> Result<(ParamNet, u64)> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (net, seed) = parse_net(&mut lines)?;
        if let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::format("network dump", n, format!("trailing content {l:?}")));
        }
        Ok((net, seed))
    }
}

fn join_floats(vals: &[f64]) -> String {
    vals.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(" ")
}

type Lines<'a> = dyn Iterator<Item = (usize, &'a str)> + 'a;

fn expect_line<'a>(lines: &mut Lines<'a>, what: &str) -> Result<(usize, &'a str)> {
    lines
        .next()
        .ok_or_else(|| Error::format("network dump", 0, format!("unexpected end, wanted {what}")))
}

fn parse_floats(n: usize, s: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::format("network dump", n, "non-numeric or non-finite value"))?;
    if vals.len() != expected {
        return Err(Error::format(
            "network dump",
            n,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn parse_net<'a>(lines: &mut Lines<'a>) -> Result<(ParamNet, u64)> {
    let (n, header) = expect_line(lines, "header")?;
    if header.trim() != "skillseq-paramnet 1" {
        return Err(Error::format("network dump", n, format!("unknown header {header:?}")));
    }
    let (n, topo) = expect_line(lines, "topology")?;
    let topology: Vec<usize> = topo
        .strip_prefix("topology ")
        .and_then(|t| t.split_whitespace().map(|v| v.parse().ok()).collect())
        .filter(|t: &Vec<usize>| t.len() >= 2 && t.iter().all(|&d| d > 0))
        .ok_or_else(|| Error::format("network dump", n, "bad topology line"))?;
    let (n, seed) = expect_line(lines, "seed")?;
    let seed: u64 = seed
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::format("network dump", n, "bad seed line"))?;
    let mut net = ParamNet::zeros(&topology);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let (n, l) = expect_line(lines, "layer")?;
        if l.trim() != format!("layer {i}") {
            return Err(Error::format("network dump", n, format!("expected layer {i}")));
        }
        for o in 0..layer.outputs {
            let (n, l) = expect_line(lines, "weight row")?;
            let row = l
                .strip_prefix("w ")
                .ok_or_else(|| Error::format("network dump", n, "expected weight row"))?;
            let vals = parse_floats(n, row, layer.inputs)?;
            layer.weights[o * layer.inputs..(o + 1) * layer.inputs].copy_from_slice(&vals);
        }
        let (n, l) = expect_line(lines, "bias row")?;
        let row = l
            .strip_prefix("b ")
            .ok_or_else(|| Error::format("network dump", n, "expected bias row"))?;
        layer.biases = parse_floats(n, row, layer.outputs)?;
    }
    Ok((net, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_per_update: usize,
    /// Upper bound on minibatches per epoch; an epoch over a larger set
    /// visits a random subset of its minibatches.
    pub max_batches_per_epoch: usize,
    pub weight_init_seed: u64,
    /// Uniform bound for every layer. `None` uses `sqrt(6/fan_in)` on hidden
    /// layers and starts the output layer at zero weights with biases at the
    /// workspace centre.
    pub init_scale: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 1,
            epochs_per_update: 20,
            max_batches_per_epoch: 32,
            weight_init_seed: 0,
            init_scale: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "lowlevel.learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_batches_per_epoch == 0 {
            return Err(Error::Config(
                "lowlevel.batch_size and max_batches_per_epoch must be >= 1".into(),
            ));
        }
        if matches!(self.init_scale, Some(s) if !(s.is_finite() && s >= 0.0)) {
            return Err(Error::Config("lowlevel.init_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Summary of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose +/- step crossed a rectifier kink; their finite
    /// difference is not a derivative and they are left out.
    pub skipped_kinks: usize,
}

pub const FD_STEP: f64 = 1e-5;

/// Compares backprop against central differences for every parameter.
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(net: &ParamNet, input: &[f64], target: &[f64], floor: f64) -> GradCheck {
    assert!(floor > 0.0, "floor must be positive");
    let analytic: Vec<f64> = net.gradient(input, target).params().copied().collect();
    let base_pattern = net.relu_pattern(input);
    let mut probe = net.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for (k, &a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().nth(k).unwrap();
        *probe.params_mut().nth(k).unwrap() = orig + FD_STEP;
        let plus = probe.loss(input, target);
        let plus_pattern = probe.relu_pattern(input);
        *probe.params_mut().nth(k).unwrap() = orig - FD_STEP;
        let minus = probe.loss(input, target);
        let minus_pattern = probe.relu_pattern(input);
        *probe.params_mut().nth(k).unwrap() = orig;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    report
}

/// One network per meta-task.
#[derive(Debug, Clone, PartialEq)]
pub struct LowLevelPolicy {
    nets: Vec<ParamNet>,
    seeds: [u64; 4],
    pub epsilon_low: f64,
}

impl LowLevelPolicy {
    pub fn new(cfg: &TrainConfig, epsilon_low: f64) -> Self {
        let topology = default_topology();
        let seeds = MetaTaskId::ALL.map(|t| derive_seed(cfg.weight_init_seed, t.index() as u64));
        let nets = seeds
            .iter()
            .map(|&s| ParamNet::random(&topology, cfg.init_scale, &mut seeded_rng(s)))
            .collect();
        LowLevelPolicy {
            nets,
            seeds,
            epsilon_low,
        }
    }

    pub fn zeros(epsilon_low: f64) -> Self {
        LowLevelPolicy {
            nets: (0..MetaTaskId::COUNT)
                .map(|_| ParamNet::zeros(&default_topology()))
                .collect(),
            seeds: [0; 4],
            epsilon_low,
        }
    }

    pub fn net(&self, task: MetaTaskId) -> &ParamNet {
        &self.nets[task.index()]
    }

    pub fn net_mut(&mut self, task: MetaTaskId) -> &mut ParamNet {
        &mut self.nets[task.index()]
    }

    /// Network output for the skill's meta-task, clamped to the workspace.
    pub fn predict(&self, skill: SkillId, o: &ObjectState) -> SkillParams {
        let y = self.net(skill.meta_task()).forward(&encode_obs(o));
        SkillParams::new(y[0].clamp(0.0, 1.0), y[1].clamp(0.0, 1.0))
    }

    pub fn explore_params(
        &self,
        skill: SkillId,
        o: &ObjectState,
        rng: &mut Rng,
        mode: SelectMode,
    ) -> SkillParams {
        self.explore_params_traced(skill, o, rng, mode).0
    }

    pub(crate) fn explore_params_traced(
        &self,
        skill: SkillId,
        o: &ObjectState,
        rng: &mut Rng,
        mode: SelectMode,
    ) -> (SkillParams, bool) {
        if mode == SelectMode::EpsilonGreedy
            && self.epsilon_low > 0.0
            && rng.gen::<f64>() < self.epsilon_low
        {
            return (SkillParams::new(rng.gen::<f64>(), rng.gen::<f64>()), true);
        }
        (self.predict(skill, o), false)
    }

    /// Trains the task's network alone with in-order minibatches over every
    /// sample for `epochs_per_update` epochs. Returns the mean loss over
    /// `samples` after training, or `None` when there is no data.
    pub fn train(&mut self, task: MetaTaskId, samples: &[Sample], cfg: &TrainConfig) -> Option<f64> {
        if samples.is_empty() {
            return None;
        }
        debug_assert!(samples.iter().all(|s| s.task == task));
        let data: Vec<([f64; 7], [f64; 2])> = samples.iter().map(training_pair).collect();
        let net = &mut self.nets[task.index()];
        let mut grad = ParamNet::zeros(&net.topology());
        for _ in 0..cfg.epochs_per_update {
            for batch in data.chunks(cfg.batch_size) {
                grad.clear();
                let scale = 1.0 / batch.len() as f64;
                for (x, t) in batch {
                    net.accumulate(x, t, scale, &mut grad);
                }
                net.apply(&grad, cfg.learning_rate);
            }
        }
        Some(mean_loss(net, &data))
    }

    /// Trains all networks on the union of `parts`. Each epoch visits up to
    /// `max_batches_per_epoch` minibatches drawn without replacement; a batch
    /// mixes tasks, the loss is the batch mean, and each sample's gradient
    /// goes to its own task's network. Returns the mean loss seen in the
    /// first epoch, or `None` when there is no data.
    pub fn train_pooled(&mut self, parts: &[&[Sample]], cfg: &TrainConfig, rng: &mut Rng) -> Option<f64> {
        let total: usize = parts.iter().map(|p| p.len()).sum();
        if total == 0 {
            return None;
        }
        let lookup = |mut i: usize| -> &Sample {
            for p in parts {
                if i < p.len() {
                    return &p[i];
                }
                i -= p.len();
            }
            unreachable!("index past pooled samples")
        };
        let mut grads: Vec<ParamNet> = self
            .nets
            .iter()
            .map(|n| ParamNet::zeros(&n.topology()))
            .collect();
        let per_epoch = total.min(cfg.batch_size.saturating_mul(cfg.max_batches_per_epoch));
        let mut scratch = Scratch::default();
        let mut first_loss = None;
        for _ in 0..cfg.epochs_per_update {
            let order = index::sample(rng, total, per_epoch).into_vec();
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                if let [i] = batch {
                    let s = lookup(*i);
                    let (x, t) = training_pair(s);
                    epoch_loss += self.nets[s.task.index()].sgd_step(&x, &t, cfg.learning_rate, &mut scratch);
                    continue;
                }
                let mut touched = [false; 4];
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let s = lookup(i);
                    let (x, t) = training_pair(s);
                    let k = s.task.index();
                    if !touched[k] {
                        grads[k].clear();
                        touched[k] = true;
                    }
                    epoch_loss += self.nets[k].accumulate(&x, &t, scale, &mut grads[k]);
                }
                for (k, net) in self.nets.iter_mut().enumerate() {
                    if touched[k] {
                        net.apply(&grads[k], cfg.learning_rate);
                    }
                }
            }
            first_loss.get_or_insert(epoch_loss / per_epoch as f64);
        }
        first_loss
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "skillseq-lowlevel 1").unwrap();
        writeln!(out, "epsilon_low {}", format_f64(self.epsilon_low)).unwrap();
        for task in MetaTaskId::ALL {
            writeln!(out, "task {}", task.index()).unwrap();
            out.push_str(&self.net(task).to_text(self.seeds[task.index()]));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LowLevelPolicy> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, header) = expect_line(&mut lines, "header")?;
        if header.trim() != "skillseq-lowlevel 1" {
            return Err(Error::format("network dump", n, format!("unknown header {header:?}")));
        }
        let (n, eps) = expect_line(&mut lines, "epsilon_low")?;
        let epsilon_low = eps
            .strip_prefix("epsilon_low ")
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| (0.0..=1.0).contains(v))
            .ok_or_else(|| Error::format("network dump", n, "bad epsilon_low line"))?;
        let mut nets = Vec::with_capacity(4);
        let mut seeds = [0u64; 4];
        for task in MetaTaskId::ALL {
            let (n, l) = expect_line(&mut lines, "task")?;
            if l.trim() != format!("task {}", task.index()) {
                return Err(Error::format("network dump", n, format!("expected task {}", task.index())));
            }
            let (net, seed) = parse_net(&mut lines)?;
            if net.input_dim() != ObjectState::FEATURE_DIM || net.output_dim() != OUTPUT_DIM {
                return Err(Error::format("network dump", n, "network shape does not match the task"));
            }
            seeds[task.index()] = seed;
            nets.push(net);
        }
        if let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::format("network dump", n, format!("trailing content {l:?}")));
        }
        Ok(LowLevelPolicy {
            nets,
            seeds,
            epsilon_low,
        })
    }
}

fn training_pair(s: &Sample) -> ([f64; 7], [f64; 2]) {
    (encode_obs(&s.obs), [s.params.x, s.params.y])
}

fn mean_loss(net: &ParamNet, data: &[([f64; 7], [f64; 2])]) -> f64 {
    data.iter().map(|(x, t)| net.loss(x, t)).sum::<f64>() / data.len() as f64
}
