//! Python bindings: the drawer environment, oracle parameters and seeded
//! training runs with summary statistics.

use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use skillseq::baselines::oracle_params as oracle;
use skillseq::cli;
use skillseq::env::{Action, ObjectState, SkillId, SkillParams};
use skillseq::ExperimentConfig;

fn py_err(e: skillseq::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn skill(name: &str) -> PyResult<SkillId> {
    SkillId::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown skill {name:?}")))
}

fn config(json: Option<&str>) -> PyResult<ExperimentConfig> {
    match json {
        Some(text) => ExperimentConfig::parse(text, Path::new("<python>")).map_err(py_err),
        None => Ok(ExperimentConfig::default()),
    }
}

fn obs_dict(o: &ObjectState) -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("block_x", o.block_xy[0]),
        ("block_y", o.block_xy[1]),
        ("handle_x", o.drawer_handle_xy[0]),
        ("handle_y", o.drawer_handle_xy[1]),
        ("drawer_openness", o.drawer_openness),
        ("block_in_drawer", f64::from(u8::from(o.block_in_drawer))),
        ("gripper_holding", f64::from(u8::from(o.gripper_holding))),
    ])
}

#[pyclass(name = "DrawerEnv")]
struct PyDrawerEnv {
    inner: skillseq::DrawerEnv,
}

#[pymethods]
impl PyDrawerEnv {
    /// `config_json` is a full experiment config; only its `env` section is used.
    #[new]
    #[pyo3(signature = (config_json=None))]
    fn new(config_json: Option<&str>) -> PyResult<Self> {
        let cfg = config(config_json)?;
        let inner = skillseq::DrawerEnv::new(cfg.env).map_err(py_err)?;
        Ok(PyDrawerEnv { inner })
    }

    fn reset(&mut self, seed: u64) -> BTreeMap<&'static str, f64> {
        obs_dict(&self.inner.reset(seed))
    }

    fn state(&self) -> BTreeMap<&'static str, f64> {
        obs_dict(self.inner.state())
    }

    /// Returns `(reward, observation, done)`.
    fn step(&mut self, skill_name: &str, x: f64, y: f64) -> PyResult<(f64, BTreeMap<&'static str, f64>, bool)> {
        let out = self.inner.step(Action::new(skill(skill_name)?, SkillParams::new(x, y)));
        Ok((out.reward, obs_dict(&out.next_obs), out.done))
    }

    /// Parameters that succeed for `skill_name` from the current state.
    fn oracle_params(&self, skill_name: &str) -> PyResult<(f64, f64)> {
        let p = oracle(self.inner.config(), self.inner.state(), skill(skill_name)?);
        Ok((p.x, p.y))
    }
}

#[pyfunction]
fn joint_success_probability(epsilon: f64, sequence_len: u32) -> f64 {
    skillseq::exploration::joint_success_probability(epsilon, sequence_len)
}

#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_json()
}

/// Trains one seed and returns final-window statistics.
#[pyfunction]
#[pyo3(signature = (seed, config_json=None, episodes=None))]
fn train(py: Python<'_>, seed: u64, config_json: Option<&str>, episodes: Option<usize>) -> PyResult<BTreeMap<&'static str, Vec<f64>>> {
    let mut cfg = config(config_json)?;
    if let Some(n) = episodes {
        cfg.episode_loop.max_episode_num = n;
    }
    let run = py.detach(|| cli::run_seed(&cfg, seed)).map_err(py_err)?;
    let s = cli::summarize(&run, cfg.final_window);
    Ok(BTreeMap::from([
        ("final_success", s.final_success.to_vec()),
        ("final_reward", vec![s.final_reward]),
        ("stage_counts", s.stage_counts.iter().map(|&c| c as f64).collect()),
        ("episode_rewards", run.records.iter().map(|r| r.total_reward).collect()),
    ]))
}

#[pymodule]
fn skillseq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDrawerEnv>()?;
    m.add_function(wrap_pyfunction!(joint_success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
