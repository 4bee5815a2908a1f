//! Tabular Q-learning over skill-history states.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::SkillId;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// The last `n` executed skills, most recent first. `None` pads a fresh history.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SkillHistory {
    slots: Vec<Option<SkillId>>,
}

impl SkillHistory {
    pub fn new(n: usize) -> Self {
        SkillHistory {
            slots: vec![None; n],
        }
    }

    pub fn from_slots(slots: Vec<Option<SkillId>>) -> Self {
        SkillHistory { slots }
    }

    pub fn slots(&self) -> &[Option<SkillId>] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, skill: SkillId) {
        if self.slots.is_empty() {
            return;
        }
        self.slots.rotate_right(1);
        self.slots[0] = Some(skill);
    }

    pub fn pushed(&self, skill: SkillId) -> SkillHistory {
        let mut h = self.clone();
        h.push(skill);
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    /// Fixed step size `lr`.
    #[default]
    Constant,
    /// `lr / n^power` where `n` is the visit count of the updated entry;
    /// `power = 1` is the sample-average schedule.
    Decaying { power: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningConfig {
    pub lr: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub n_history: usize,
    pub initial_q: f64,
    pub lr_schedule: LearningRate,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            lr: 0.1,
            gamma: 0.9,
            epsilon: 0.15,
            n_history: 4,
            initial_q: 0.0,
            lr_schedule: LearningRate::Constant,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr <= 1.0) {
            return Err(Error::Config(format!("qlearn.lr must be in (0,1], got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "qlearn.gamma must be in [0,1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "qlearn.epsilon must be in [0,1], got {}",
                self.epsilon
            )));
        }
        if self.n_history < 1 {
            return Err(Error::Config("qlearn.n_history must be >= 1".into()));
        }
        if let LearningRate::Decaying { power } = self.lr_schedule {
            if !(power > 0.0 && power <= 1.0) {
                return Err(Error::Config(format!(
                    "qlearn.lr_schedule power must be in (0,1], got {power}"
                )));
            }
        }
        if !self.initial_q.is_finite() {
            return Err(Error::Config("qlearn.initial_q must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn step_size(&self, visits: u64) -> f64 {
        match self.lr_schedule {
            LearningRate::Constant => self.lr,
            LearningRate::Decaying { power } => self.lr / (visits.max(1) as f64).powf(power),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Greedy,
    EpsilonGreedy,
}

/// Argmax with lowest-index tie-breaking.
pub fn greedy_index(values: &[f64; 4]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Returns the chosen skill and whether the random branch was taken.
pub(crate) fn epsilon_greedy(
    values: &[f64; 4],
    epsilon: f64,
    mode: SelectMode,
    rng: &mut Rng,
) -> (SkillId, bool) {
    if mode == SelectMode::EpsilonGreedy && epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let k = rng.gen_range(0..SkillId::COUNT);
        return (SkillId::ALL[k], true);
    }
    (SkillId::ALL[greedy_index(values)], false)
}

/// One Q-learning step on a single entry; returns the new value.
pub(crate) fn td_update(
    current: f64,
    reward: f64,
    next_max: f64,
    done: bool,
    step: f64,
    gamma: f64,
) -> f64 {
    let bootstrap = if done { 0.0 } else { next_max };
    current + step * (reward + gamma * bootstrap - current)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: BTreeMap<SkillHistory, [f64; 4]>,
    visits: BTreeMap<SkillHistory, [u64; 4]>,
    initial: f64,
}

impl QTable {
    pub fn new(initial_q: f64) -> Self {
        QTable {
            entries: BTreeMap::new(),
            visits: BTreeMap::new(),
            initial: initial_q,
        }
    }

    pub fn row(&self, h: &SkillHistory) -> [f64; 4] {
        self.entries.get(h).copied().unwrap_or([self.initial; 4])
    }

    pub fn get(&self, h: &SkillHistory, skill: SkillId) -> f64 {
        self.row(h)[skill.index()]
    }

    pub fn set(&mut self, h: &SkillHistory, skill: SkillId, value: f64) {
        let initial = self.initial;
        self.entries.entry(h.clone()).or_insert([initial; 4])[skill.index()] = value;
    }

    pub fn visits(&self, h: &SkillHistory) -> [u64; 4] {
        self.visits.get(h).copied().unwrap_or([0; 4])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SkillHistory, &[f64; 4])> {
        self.entries.iter()
    }

    pub fn max_value(&self, h: &SkillHistory) -> f64 {
        let row = self.row(h);
        row[greedy_index(&row)]
    }

    /// Serializes as one line per key: n skill codes (`N` for an empty
    /// slot) followed by the four Q-values, comma separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (h, row) in &self.entries {
            for slot in h.slots() {
                match slot {
                    Some(s) => write!(out, "{},", s.index()).unwrap(),
                    None => out.push_str("N,"),
                }
            }
            let vals: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            out.push_str(&vals.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, n_history: usize, initial_q: f64) -> Result<QTable> {
        let mut table = QTable::new(initial_q);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_history + 4 {
                return Err(Error::format(
                    "q-table",
                    lineno,
                    format!("expected {} fields, found {}", n_history + 4, fields.len()),
                ));
            }
            let mut slots = Vec::with_capacity(n_history);
            for f in &fields[..n_history] {
                let slot = match *f {
                    "N" => None,
                    code => Some(parse_skill_code(code).ok_or_else(|| {
                        Error::format("q-table", lineno, format!("bad skill code {code:?}"))
                    })?),
                };
                slots.push(slot);
            }
            let mut row = [0.0; 4];
            for (k, f) in fields[n_history..].iter().enumerate() {
                row[k] = f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format("q-table", lineno, format!("bad value {f:?}")))?;
            }
            table.entries.insert(SkillHistory::from_slots(slots), row);
        }
        Ok(table)
    }
}

pub(crate) fn parse_skill_code(code: &str) -> Option<SkillId> {
    code.parse::<usize>().ok().and_then(SkillId::from_index)
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn select_skill(
    q: &QTable,
    h: &SkillHistory,
    cfg: &QLearningConfig,
    mode: SelectMode,
    rng: &mut Rng,
) -> SkillId {
    select_skill_traced(q, h, cfg, mode, rng).0
}

pub(crate) fn select_skill_traced(
    q: &QTable,
    h: &SkillHistory,
    cfg: &QLearningConfig,
    mode: SelectMode,
    rng: &mut Rng,
) -> (SkillId, bool) {
    epsilon_greedy(&q.row(h), cfg.epsilon, mode, rng)
}

/// Q(h,a) += lr * (r + gamma * max_b Q(h',b) - Q(h,a)), with no bootstrap on `done`.
pub fn update(
    q: &mut QTable,
    h: &SkillHistory,
    taken: SkillId,
    r: f64,
    h_next: &SkillHistory,
    done: bool,
    cfg: &QLearningConfig,
) {
    let next_max = if done { 0.0 } else { q.max_value(h_next) };
    let visits = q.visits.entry(h.clone()).or_insert([0; 4]);
    visits[taken.index()] += 1;
    let step = cfg.step_size(visits[taken.index()]);
    let current = q.get(h, taken);
    let value = td_update(current, r, next_max, done, step, cfg.gamma);
    q.set(h, taken, value);
}

/// Greedy skill sequence from an empty history.
pub fn greedy_rollout(q: &QTable, cfg: &QLearningConfig, max_len: usize) -> Vec<SkillId> {
    let mut h = SkillHistory::new(cfg.n_history);
    let mut out = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let row = q.row(&h);
        let skill = SkillId::ALL[greedy_index(&row)];
        out.push(skill);
        h.push(skill);
    }
    out
}
