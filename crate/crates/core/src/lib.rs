//! Two-level policy for sequencing parameterised manipulation skills: a
//! tabular Q-learner picks the next skill from the recent skill history and
//! per-task networks regress the skill's continuous parameters.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod env;
pub mod error;
pub mod exploration;
pub mod highlevel;
pub mod lowlevel;
pub mod metrics;
pub mod rng;

pub use env::{Action, DrawerEnv, EnvConfig, MetaTaskId, ObjectState, SkillId, SkillParams, StepOutcome};
pub use error::{Error, Result};
pub use exploration::{Agent, AgentSpec, EpisodeLoopConfig, EpisodeRecord, ExplorationMode};
pub use config::ExperimentConfig;
