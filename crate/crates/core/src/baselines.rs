//! Comparison policies: a step-indexed task schema for the high level and an
//! oracle parameter policy that reads the environment geometry.

use std::fmt::Write as _;

use crate::env::{EnvConfig, ObjectState, SkillId, SkillParams};
use crate::error::{Error, Result};
use crate::highlevel::{epsilon_greedy, format_f64, td_update, QLearningConfig, SelectMode};
use crate::rng::Rng;

/// High-level baseline conditioned only on the position in the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaPolicy {
    q_by_step: Vec<[f64; 4]>,
    visits: Vec<[u64; 4]>,
    pub epsilon: f64,
}

impl SchemaPolicy {
    /// One row per step index `0..max_steps`, plus one for the post-budget state.
    pub fn new(max_steps: usize, epsilon: f64, initial_q: f64) -> Self {
        let rows = max_steps + 1;
        SchemaPolicy {
            q_by_step: vec![[initial_q; 4]; rows],
            visits: vec![[0; 4]; rows],
            epsilon,
        }
    }

    pub fn rows(&self) -> usize {
        self.q_by_step.len()
    }

    fn clamp(&self, step: usize) -> usize {
        step.min(self.q_by_step.len() - 1)
    }

    pub fn row(&self, step: usize) -> [f64; 4] {
        self.q_by_step[self.clamp(step)]
    }

    pub fn set(&mut self, step: usize, skill: SkillId, value: f64) {
        let i = self.clamp(step);
        self.q_by_step[i][skill.index()] = value;
    }

    pub fn greedy_sequence(&self, len: usize) -> Vec<SkillId> {
        (0..len)
            .map(|k| SkillId::ALL[crate::highlevel::greedy_index(&self.row(k))])
            .collect()
    }

    /// Same line format as the history Q-table with a single key slot
    /// holding the step index.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, row) in self.q_by_step.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
            writeln!(out, "{k},{}", vals.join(",")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, epsilon: f64) -> Result<SchemaPolicy> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 || fields[0].parse::<usize>().ok() != Some(rows.len()) {
                return Err(Error::format("schema table", i + 1, "expected `step,q0,q1,q2,q3` in step order"));
            }
            let mut row = [0.0; 4];
            for (k, f) in fields[1..].iter().enumerate() {
                row[k] = f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format("schema table", i + 1, format!("bad value {f:?}")))?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::format("schema table", 1, "empty table"));
        }
        Ok(SchemaPolicy {
            visits: vec![[0; 4]; rows.len()],
            q_by_step: rows,
            epsilon,
        })
    }
}

/// Epsilon-greedy over the step's row. Indices past the end reuse the last row.
pub fn schema_select(schema: &SchemaPolicy, step_index: usize, mode: SelectMode, rng: &mut Rng) -> SkillId {
    schema_select_traced(schema, step_index, mode, rng).0
}

pub(crate) fn schema_select_traced(
    schema: &SchemaPolicy,
    step_index: usize,
    mode: SelectMode,
    rng: &mut Rng,
) -> (SkillId, bool) {
    epsilon_greedy(&schema.row(step_index), schema.epsilon, mode, rng)
}

/// The history-table update rule with the step index as state.
pub fn schema_update(
    schema: &mut SchemaPolicy,
    step_index: usize,
    taken: SkillId,
    r: f64,
    next_index: usize,
    done: bool,
    cfg: &QLearningConfig,
) {
    let next = schema.row(next_index);
    let next_max = next[crate::highlevel::greedy_index(&next)];
    let i = schema.clamp(step_index);
    schema.visits[i][taken.index()] += 1;
    let step = cfg.step_size(schema.visits[i][taken.index()]);
    let current = schema.q_by_step[i][taken.index()];
    schema.q_by_step[i][taken.index()] = td_update(current, r, next_max, done, step, cfg.gamma);
}

/// Exact skill targets read off the environment geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleLowLevel {
    pub env: EnvConfig,
}

impl OracleLowLevel {
    pub fn new(env: EnvConfig) -> Self {
        OracleLowLevel { env }
    }

    pub fn params(&self, state: &ObjectState, skill: SkillId) -> SkillParams {
        oracle_params(&self.env, state, skill)
    }
}

/// Handle for Pull/Push, block for Grasp, drawer-interior centre for Put,
/// all at the drawer's current position.
pub fn oracle_params(env: &EnvConfig, state: &ObjectState, skill: SkillId) -> SkillParams {
    let open = state.is_open();
    let p = match skill {
        SkillId::Pull | SkillId::Push => env.handle_at(open),
        SkillId::Grasp => state.block_xy,
        SkillId::Put => env.interior_center(open),
    };
    SkillParams::new(p[0], p[1])
}
