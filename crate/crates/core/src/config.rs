//! JSON experiment configuration. Every section is optional and falls back
//! to the reference defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::exploration::{AgentSpec, EpisodeLoopConfig};
use crate::highlevel::QLearningConfig;
use crate::lowlevel::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub qlearn: QLearningConfig,
    pub lowlevel: TrainConfig,
    pub agent: AgentSpec,
    #[serde(rename = "loop")]
    pub episode_loop: EpisodeLoopConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Greedy evaluation episodes per seed for `eval`.
    pub eval_episodes: usize,
    pub smoothing_window: usize,
    /// Trailing episodes used for final-window summaries.
    pub final_window: usize,
    /// Spacing of the step-indexed curves.
    pub step_grid: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            qlearn: QLearningConfig::default(),
            lowlevel: TrainConfig::default(),
            agent: AgentSpec::default(),
            episode_loop: EpisodeLoopConfig::default(),
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("runs"),
            eval_episodes: 100,
            smoothing_window: 100,
            final_window: 1000,
            step_grid: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.qlearn.validate()?;
        self.lowlevel.validate()?;
        self.episode_loop.validate()?;
        let a = &self.agent;
        if !(0.0..=1.0).contains(&a.epsilon_low) {
            return Err(Error::Config(format!("agent.epsilon_low must be in [0,1], got {}", a.epsilon_low)));
        }
        if !(a.undersample_multiplier.is_finite() && a.undersample_multiplier > 0.0) {
            return Err(Error::Config("agent.undersample_multiplier must be > 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.smoothing_window < 1 || self.final_window < 1 || self.step_grid < 1 {
            return Err(Error::Config(
                "smoothing_window, final_window and step_grid must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::parse("{}", Path::new("x.json")).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.qlearn.epsilon, 0.15);
        assert_eq!(cfg.lowlevel.learning_rate, 1e-4);
        assert_eq!(cfg.episode_loop.max_steps_per_episode, 12);
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds = vec![3, 1];
        cfg.qlearn.lr_schedule = crate::highlevel::LearningRate::Decaying { power: 0.6 };
        let back = ExperimentConfig::parse(&cfg.to_json(), Path::new("x.json")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ExperimentConfig::parse("{\n  \"seeds\": [1,\n}", Path::new("bad.json")).unwrap_err();
        match err {
            Error::ConfigSyntax { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, PathBuf::from("bad.json"));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(ExperimentConfig::parse("{\"sedes\": []}", Path::new("x")).is_err());
    }

    #[test]
    fn semantic_errors_are_reported() {
        for text in [
            r#"{"qlearn": {"gamma": 1.0}}"#,
            r#"{"seeds": []}"#,
            r#"{"smoothing_window": 0}"#,
            r#"{"agent": {"epsilon_low": 1.5}}"#,
            r#"{"loop": {"max_steps_per_episode": 0}}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text, Path::new("x")), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
