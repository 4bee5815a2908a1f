//! Positive-experience store and the random under-sampler.

use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::env::{MetaTaskId, ObjectState, SkillParams};
use crate::rng::Rng;

/// A successful `(task, observation, parameters)` triple. `obs` is the state
/// before the action that completed the stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub task: MetaTaskId,
    pub obs: ObjectState,
    pub params: SkillParams,
}

/// Append-only per-task lists. Nothing is ever removed; under-sampling
/// happens when a training view is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStore {
    per_task: [Vec<Sample>; 4],
    insertions: u64,
}

impl SampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, task: MetaTaskId, obs: ObjectState, params: SkillParams) {
        self.per_task[task.index()].push(Sample { task, obs, params });
        self.insertions += 1;
    }

    pub fn counts(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.per_task[i].len())
    }

    pub fn samples(&self, task: MetaTaskId) -> &[Sample] {
        &self.per_task[task.index()]
    }

    pub fn len(&self) -> usize {
        self.per_task.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parts(&self) -> [&[Sample]; 4] {
        [0, 1, 2, 3].map(|i| self.per_task[i].as_slice())
    }

    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    /// Every class in full, no balancing.
    pub fn full_view(&self) -> TrainingView {
        TrainingView {
            per_task: self.per_task.clone(),
        }
    }

    /// Random under-sampling: each non-empty class is reduced to
    /// `min(count, ceil(multiplier * m))` samples drawn uniformly without
    /// replacement, where `m` is the smallest non-empty class size. Empty
    /// classes stay empty. The chosen samples keep their store order.
    pub fn balanced_view_with(&self, rng: &mut Rng, multiplier: f64) -> TrainingView {
        let counts = self.counts();
        let Some(m) = counts.iter().copied().filter(|&c| c > 0).min() else {
            return TrainingView::default();
        };
        let target = ((m as f64) * multiplier.max(0.0)).ceil().max(1.0) as usize;
        let mut view = TrainingView::default();
        for (k, list) in self.per_task.iter().enumerate() {
            let take = target.min(list.len());
            if take == list.len() {
                view.per_task[k] = list.clone();
                continue;
            }
            let mut picked = index::sample(rng, list.len(), take).into_vec();
            picked.sort_unstable();
            view.per_task[k] = picked.into_iter().map(|i| list[i]).collect();
        }
        view
    }

    pub fn balanced_view(&self, rng: &mut Rng) -> TrainingView {
        self.balanced_view_with(rng, 1.0)
    }

    /// CSV dump, one row per sample, task-major in insertion order.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "task",
            "block_x",
            "block_y",
            "handle_x",
            "handle_y",
            "drawer_openness",
            "block_in_drawer",
            "gripper_holding",
            "param_x",
            "param_y",
        ])?;
        for s in self.per_task.iter().flatten() {
            let f = s.obs.features();
            let mut row = vec![s.task.index().to_string()];
            row.extend(f[..5].iter().map(|v| format!("{v:?}")));
            row.push(u8::from(s.obs.block_in_drawer).to_string());
            row.push(u8::from(s.obs.gripper_holding).to_string());
            row.push(format!("{:?}", s.params.x));
            row.push(format!("{:?}", s.params.y));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-task training lists handed to the parameter policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingView {
    per_task: [Vec<Sample>; 4],
}

impl TrainingView {
    pub fn samples(&self, task: MetaTaskId) -> &[Sample] {
        &self.per_task[task.index()]
    }

    pub fn counts(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.per_task[i].len())
    }

    pub fn parts(&self) -> [&[Sample]; 4] {
        [0, 1, 2, 3].map(|i| self.per_task[i].as_slice())
    }

    pub fn pooled(&self) -> Vec<Sample> {
        self.per_task.iter().flatten().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.per_task.iter().all(Vec::is_empty)
    }
}
