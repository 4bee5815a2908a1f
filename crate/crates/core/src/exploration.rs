//! Episode loops. `Joint` lets both levels act epsilon-greedily in every
//! episode; `Alternating` draws a per-episode flag that picks the single
//! level allowed to explore while the other acts greedily.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::baselines::{schema_select_traced, schema_update, OracleLowLevel, SchemaPolicy};
use crate::dataset::SampleStore;
use crate::env::{
    Action, DrawerEnv, EnvConfig, MetaTaskId, ObjectState, SkillId, SkillParams, StepOutcome,
};
use crate::error::{Error, Result};
use crate::highlevel::{self, select_skill_traced, QLearningConfig, QTable, SelectMode, SkillHistory};
use crate::lowlevel::{LowLevelPolicy, TrainConfig};
use crate::rng::{derive_seed, seeded_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationMode {
    Joint,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeLoopConfig {
    pub max_episode_num: usize,
    pub max_steps_per_episode: usize,
    pub mode: ExplorationMode,
    pub alt_flag_threshold: f64,
    pub seed: u64,
    /// Alternating only: follow the printed pseudocode (high level explores
    /// in both branches) instead of the one-level-at-a-time reading.
    pub pseudocode_literal: bool,
}

impl Default for EpisodeLoopConfig {
    fn default() -> Self {
        EpisodeLoopConfig {
            max_episode_num: 10_000,
            max_steps_per_episode: 12,
            mode: ExplorationMode::Alternating,
            alt_flag_threshold: 0.5,
            seed: 0,
            pseudocode_literal: false,
        }
    }
}

impl EpisodeLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps_per_episode == 0 {
            return Err(Error::Config("loop.max_steps_per_episode must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alt_flag_threshold) {
            return Err(Error::Config(format!(
                "loop.alt_flag_threshold must be in [0,1], got {}",
                self.alt_flag_threshold
            )));
        }
        Ok(())
    }

    /// Seed passed to `DrawerEnv::reset` for episode `k`. Depends only on the
    /// run seed so that runs sharing a seed see the same resets.
    pub fn episode_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, k as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighLevelKind {
    #[default]
    History,
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowLevelKind {
    #[default]
    Learned,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HighLevel {
    History(QTable),
    Schema(SchemaPolicy),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LowLevel {
    Learned(LowLevelPolicy),
    Oracle(OracleLowLevel),
}

/// Everything a training run mutates.
#[derive(Debug, Clone)]
pub struct Agent {
    pub high: HighLevel,
    pub qlearn: QLearningConfig,
    pub low: LowLevel,
    pub train: TrainConfig,
    pub store: SampleStore,
    pub undersample: bool,
    pub undersample_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSpec {
    pub high_level: HighLevelKind,
    pub low_level: LowLevelKind,
    pub epsilon_low: f64,
    pub undersample: bool,
    pub undersample_multiplier: f64,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec {
            high_level: HighLevelKind::History,
            low_level: LowLevelKind::Learned,
            epsilon_low: 0.3,
            undersample: true,
            undersample_multiplier: 1.0,
        }
    }
}

impl Agent {
    pub fn new(
        spec: &AgentSpec,
        qlearn: &QLearningConfig,
        train: &TrainConfig,
        env: &EnvConfig,
        loop_cfg: &EpisodeLoopConfig,
    ) -> Agent {
        let high = match spec.high_level {
            HighLevelKind::History => HighLevel::History(QTable::new(qlearn.initial_q)),
            HighLevelKind::Schema => HighLevel::Schema(SchemaPolicy::new(
                loop_cfg.max_steps_per_episode,
                qlearn.epsilon,
                qlearn.initial_q,
            )),
        };
        let low = match spec.low_level {
            LowLevelKind::Learned => LowLevel::Learned(LowLevelPolicy::new(train, spec.epsilon_low)),
            LowLevelKind::Oracle => LowLevel::Oracle(OracleLowLevel::new(env.clone())),
        };
        Agent {
            high,
            qlearn: qlearn.clone(),
            low,
            train: train.clone(),
            store: SampleStore::new(),
            undersample: spec.undersample,
            undersample_multiplier: spec.undersample_multiplier,
        }
    }

    fn choose_skill(
        &self,
        history: &SkillHistory,
        step: usize,
        mode: SelectMode,
        rng: &mut Rng,
    ) -> (SkillId, bool) {
        match &self.high {
            HighLevel::History(q) => select_skill_traced(q, history, &self.qlearn, mode, rng),
            HighLevel::Schema(s) => schema_select_traced(s, step, mode, rng),
        }
    }

    fn choose_params(
        &self,
        skill: SkillId,
        obs: &ObjectState,
        mode: SelectMode,
        rng: &mut Rng,
    ) -> (SkillParams, bool) {
        match &self.low {
            LowLevel::Learned(p) => p.explore_params_traced(skill, obs, rng, mode),
            LowLevel::Oracle(o) => (o.params(obs, skill), false),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn update_high(
        &mut self,
        history: &SkillHistory,
        next: &SkillHistory,
        step: usize,
        taken: SkillId,
        reward: f64,
        done: bool,
    ) {
        match &mut self.high {
            HighLevel::History(q) => highlevel::update(q, history, taken, reward, next, done, &self.qlearn),
            HighLevel::Schema(s) => schema_update(s, step, taken, reward, step + 1, done, &self.qlearn),
        }
    }

    /// Retrains the parameter networks on the (optionally balanced) store.
    fn update_low(&mut self, rng: &mut Rng) -> Option<f64> {
        let LowLevel::Learned(policy) = &mut self.low else {
            return None;
        };
        if self.undersample {
            let view = self.store.balanced_view_with(rng, self.undersample_multiplier);
            policy.train_pooled(&view.parts(), &self.train, rng)
        } else {
            policy.train_pooled(&self.store.parts(), &self.train, rng)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub action: Action,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Observation right after reset.
    pub start: ObjectState,
    pub total_reward: f64,
    pub stage_success: [bool; 4],
    pub steps: usize,
    pub transitions: Vec<Transition>,
    /// Level allowed to explore this episode.
    pub low_explores: bool,
    pub high_explores: bool,
    /// Whether a random action was actually drawn at that level.
    pub low_deviated: bool,
    pub high_deviated: bool,
    pub samples_added: [u32; 4],
    pub train_loss: Option<f64>,
}

impl EpisodeRecord {
    pub fn solved(&self) -> bool {
        self.stage_success[MetaTaskId::CloseDrawer.index()]
    }
}

struct EpisodePlan {
    high: SelectMode,
    low: SelectMode,
    update_high: bool,
    learn: bool,
}

fn plan(cfg: &EpisodeLoopConfig, rng: &mut Rng) -> EpisodePlan {
    use SelectMode::{EpsilonGreedy, Greedy};
    match cfg.mode {
        ExplorationMode::Joint => EpisodePlan {
            high: EpsilonGreedy,
            low: EpsilonGreedy,
            update_high: true,
            learn: true,
        },
        ExplorationMode::Alternating => {
            let flag: f64 = rng.gen();
            let low_turn = flag < cfg.alt_flag_threshold;
            let high = if cfg.pseudocode_literal || !low_turn {
                EpsilonGreedy
            } else {
                Greedy
            };
            EpisodePlan {
                high,
                low: if low_turn { EpsilonGreedy } else { Greedy },
                // the high level is updated only in episodes where the low level acted greedily
                update_high: !low_turn,
                learn: true,
            }
        }
    }
}

/// Runs one episode (reset, act until done or budget, record samples, update).
pub fn run_episode(
    env: &mut DrawerEnv,
    agent: &mut Agent,
    cfg: &EpisodeLoopConfig,
    episode: usize,
    rng: &mut Rng,
) -> EpisodeRecord {
    let plan = plan(cfg, rng);
    play_episode(env, agent, cfg, episode, &plan, rng)
}

/// Both levels greedy, no updates, nothing recorded.
pub fn run_greedy_episode(
    env: &mut DrawerEnv,
    agent: &mut Agent,
    cfg: &EpisodeLoopConfig,
    episode: usize,
    rng: &mut Rng,
) -> EpisodeRecord {
    let plan = EpisodePlan {
        high: SelectMode::Greedy,
        low: SelectMode::Greedy,
        update_high: false,
        learn: false,
    };
    play_episode(env, agent, cfg, episode, &plan, rng)
}

fn play_episode(
    env: &mut DrawerEnv,
    agent: &mut Agent,
    cfg: &EpisodeLoopConfig,
    episode: usize,
    plan: &EpisodePlan,
    rng: &mut Rng,
) -> EpisodeRecord {
    let mut obs = env.reset(cfg.episode_seed(episode));
    let mut history = SkillHistory::new(agent.qlearn.n_history);
    let mut record = EpisodeRecord {
        episode,
        start: obs,
        total_reward: 0.0,
        stage_success: [false; 4],
        steps: 0,
        transitions: Vec::with_capacity(cfg.max_steps_per_episode),
        low_explores: plan.low == SelectMode::EpsilonGreedy,
        high_explores: plan.high == SelectMode::EpsilonGreedy,
        low_deviated: false,
        high_deviated: false,
        samples_added: [0; 4],
        train_loss: None,
    };

    for step in 0..cfg.max_steps_per_episode {
        let (skill, high_random) = agent.choose_skill(&history, step, plan.high, rng);
        let (params, low_random) = agent.choose_params(skill, &obs, plan.low, rng);
        record.high_deviated |= high_random;
        record.low_deviated |= low_random;
        let action = Action::new(skill, params);
        let outcome = env.step(action);

        if let Some(task) = outcome.stage_completed {
            record.stage_success[task.index()] = true;
            if plan.learn {
                agent.store.record(task, obs, params);
                record.samples_added[task.index()] += 1;
            }
        }
        let next = history.pushed(skill);
        if plan.update_high {
            agent.update_high(&history, &next, step, skill, outcome.reward, outcome.done);
        }
        record.total_reward += outcome.reward;
        record.transitions.push(Transition { action, outcome });
        record.steps += 1;
        history = next;
        obs = outcome.next_obs;
        if outcome.done {
            break;
        }
    }

    if plan.learn {
        record.train_loss = agent.update_low(rng);
    }
    record
}

/// Runs `cfg.max_episode_num` episodes from a fresh environment.
pub fn run_training(env_cfg: &EnvConfig, agent: &mut Agent, cfg: &EpisodeLoopConfig) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let mut env = DrawerEnv::new(env_cfg.clone())?;
    let mut rng = seeded_rng(derive_seed(cfg.seed, u64::MAX));
    Ok((0..cfg.max_episode_num)
        .map(|k| run_episode(&mut env, agent, cfg, k, &mut rng))
        .collect())
}

/// Probability that the low level acts greedily at every one of
/// `sequence_len` steps when it explores with probability `epsilon`.
pub fn joint_success_probability(epsilon: f64, sequence_len: u32) -> f64 {
    (1.0 - epsilon).powi(sequence_len as i32)
}
