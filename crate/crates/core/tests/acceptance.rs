//! Acceptance suite. Prints one PASS/FAIL line per criterion. Deterministic
//! criteria fail the process; the statistical learning criteria are
//! reported with their measured values but do not abort the run.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng as _;
use skillseq::baselines::oracle_params;
use skillseq::cli::{self, RunOutput};
use skillseq::env::{max_episode_reward, Action, DrawerEnv, EnvConfig, MetaTaskId, SkillId, SkillParams};
use skillseq::exploration::{joint_success_probability, ExplorationMode};
use skillseq::highlevel::{greedy_rollout, update, LearningRate, QLearningConfig, QTable, SkillHistory};
use skillseq::lowlevel::{default_topology, gradient_check, ParamNet};
use skillseq::metrics::median;
use skillseq::rng::{derive_seed, seeded_rng};
use skillseq::dataset::SampleStore;
use skillseq::ExperimentConfig;

const SEEDS: u64 = 10;
const EPISODES: usize = 10_000;
const FINAL_WINDOW: usize = 1000;
const STAGE_FLOORS: [f64; 4] = [0.95, 0.8, 0.6, 0.3];
const Q_TOL: f64 = 1e-4;
const Q_BUDGET_SECS: f64 = 10.0;
const GRAD_TOL: f64 = 1e-4;
const GRAD_TRIPLES: u64 = 100;
/// Denominator floor: central differences at step 1e-5 carry round-off of
/// roughly 1e-11, so gradients below 1e-7 are compared absolutely.
const GRAD_FLOOR: f64 = 1e-7;
const JOINT_P_EXPECTED: f64 = 0.00243;
const INCLUSION_TOL: f64 = 0.01;

struct Report {
    hard_failures: usize,
    soft_failures: usize,
}

impl Report {
    fn line(&mut self, hard: bool, id: &str, ok: bool, detail: String) {
        println!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            if hard {
                self.hard_failures += 1;
            } else {
                self.soft_failures += 1;
            }
        }
    }
}

fn oracle_sequence_score() -> (bool, String) {
    let cfg = EnvConfig::default();
    let mut env = DrawerEnv::new(cfg.clone()).unwrap();
    let mut worst = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    for seed in 0..100 {
        env.reset(seed);
        let mut total = 0.0;
        for skill in [SkillId::Pull, SkillId::Grasp, SkillId::Put, SkillId::Push] {
            let p = oracle_params(&cfg, env.state(), skill);
            total += env.step(Action::new(skill, p)).reward;
        }
        worst = worst.min(total);
        best = best.max(total);
    }
    let ok = worst == 310.0 && best == 310.0 && max_episode_reward(&cfg) == 310.0;
    (ok, format!("oracle sequence reward over 100 resets: min {worst} max {best} (expected exactly 310)"))
}

/// Values of every skill at every prefix of the horizon-4 tree, computed by
/// exhaustive backup over the real environment with oracle parameters.
fn value_iteration(env: &DrawerEnv, h: &SkillHistory, depth: usize, gamma: f64, out: &mut BTreeMap<String, [f64; 4]>) -> f64 {
    let mut row = [0.0; 4];
    for skill in SkillId::ALL {
        let mut e = env.clone();
        let p = oracle_params(e.config(), e.state(), skill);
        let o = e.step(Action::new(skill, p));
        let terminal = o.done || depth + 1 == 4;
        let next = h.pushed(skill);
        let future = if terminal { 0.0 } else { value_iteration(&e, &next, depth + 1, gamma, out) };
        row[skill.index()] = o.reward + gamma * future;
    }
    out.insert(format!("{:?}", h.slots()), row);
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn q_learning_matches_value_iteration() -> (bool, String) {
    let start = Instant::now();
    let env_cfg = EnvConfig::default();
    let cfg = QLearningConfig {
        lr: 1.0,
        epsilon: 1.0,
        lr_schedule: LearningRate::Decaying { power: 0.6 },
        ..QLearningConfig::default()
    };
    let mut env = DrawerEnv::new(env_cfg).unwrap();
    env.reset(0);
    let mut vi = BTreeMap::new();
    value_iteration(&env, &SkillHistory::new(cfg.n_history), 0, cfg.gamma, &mut vi);

    let mut q = QTable::new(0.0);
    let mut rng = seeded_rng(7);
    let episodes = 200_000;
    for k in 0..episodes {
        env.reset(derive_seed(1, k));
        let mut h = SkillHistory::new(cfg.n_history);
        for t in 0..4 {
            let skill = SkillId::ALL[rng.gen_range(0..4)];
            let p = oracle_params(env.config(), env.state(), skill);
            let o = env.step(Action::new(skill, p));
            let next = h.pushed(skill);
            let done = o.done || t == 3;
            update(&mut q, &h, skill, o.reward, &next, done, &cfg);
            if done {
                break;
            }
            h = next;
        }
    }
    let mut max_err = 0.0f64;
    let mut missing = 0;
    for (h, row) in q.iter() {
        match vi.get(&format!("{:?}", h.slots())) {
            Some(v) => {
                for a in 0..4 {
                    max_err = max_err.max((row[a] - v[a]).abs());
                }
            }
            None => missing += 1,
        }
    }
    let greedy = greedy_rollout(&q, &cfg, 4);
    env.reset(0);
    let greedy_reward: f64 = greedy
        .iter()
        .map(|&skill| {
            let p = oracle_params(env.config(), env.state(), skill);
            env.step(Action::new(skill, p)).reward
        })
        .sum();
    let secs = start.elapsed().as_secs_f64();
    let ok = max_err < Q_TOL
        && missing == 0
        && q.len() == vi.len()
        && greedy_reward == 310.0
        && secs < Q_BUDGET_SECS;
    (
        ok,
        format!(
            "max |Q - Q*| = {max_err:.3e} over {} histories (tol {Q_TOL:e}), greedy {greedy:?} scores {greedy_reward}, {secs:.2}s (budget {Q_BUDGET_SECS}s)",
            q.len()
        ),
    )
}

fn gradient_checks() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    for seed in 0..GRAD_TRIPLES {
        let mut rng = seeded_rng(derive_seed(42, seed));
        let net = ParamNet::random(&default_topology(), Some(0.3), &mut rng);
        let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
        let r = gradient_check(&net, &x, &t, GRAD_FLOOR);
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
        skipped += r.skipped_kinks;
    }
    (
        worst < GRAD_TOL,
        format!("max relative error {worst:.3e} over {GRAD_TRIPLES} triples ({checked} parameters checked, {skipped} kink crossings skipped; tol {GRAD_TOL:e}, floor {GRAD_FLOOR:e})"),
    )
}

fn joint_probability() -> (bool, String) {
    let p = joint_success_probability(0.7, 5);
    ((p - JOINT_P_EXPECTED).abs() < 1e-12, format!("joint_success_probability(0.7, 5) = {p:.5} (expected {JOINT_P_EXPECTED})"))
}

fn undersampling_properties() -> (bool, String) {
    let mut env = DrawerEnv::new(EnvConfig::default()).unwrap();
    let mut store = SampleStore::new();
    for (k, n) in [200usize, 50, 10, 2].into_iter().enumerate() {
        for i in 0..n {
            let o = env.reset((k * 1000 + i) as u64);
            store.record(MetaTaskId::ALL[k], o, SkillParams::new(i as f64 / 1e4, 0.0));
        }
    }
    let before = store.clone();
    let mut rng = seeded_rng(2024);
    let rounds = 1000;
    let mut hits = [vec![0usize; 200], vec![0; 50], vec![0; 10], vec![0; 2]];
    let mut balanced = true;
    for _ in 0..rounds {
        let view = store.balanced_view(&mut rng);
        balanced &= view.counts() == [2, 2, 2, 2];
        for t in MetaTaskId::ALL {
            for s in view.samples(t) {
                hits[t.index()][(s.params.x * 1e4).round() as usize] += 1;
            }
        }
    }
    // The absolute band applies to the largest class, where the expected
    // frequency is 0.01. Smaller classes have binomial spread above 0.01 at
    // this many rounds, so they are held to 4 standard deviations instead.
    let mut worst_major = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for (k, n) in [200usize, 50, 10, 2].into_iter().enumerate() {
        let p = 2.0 / n as f64;
        let sd = (p * (1.0 - p) / rounds as f64).sqrt();
        for &h in &hits[k] {
            let dev = (h as f64 / rounds as f64 - p).abs();
            if k == 0 {
                worst_major = worst_major.max(dev);
            }
            if sd > 0.0 {
                worst_sigma = worst_sigma.max(dev / sd);
            }
        }
    }
    let untouched = store == before;
    (
        balanced && untouched && worst_major <= INCLUSION_TOL && worst_sigma <= 4.0,
        format!(
            "views balanced {balanced}, store unchanged {untouched}, largest-class max inclusion deviation {worst_major:.4} (tol {INCLUSION_TOL}), all classes within {worst_sigma:.2} sd (limit 4) over {rounds} resamples of {{200,50,10,2}}"
        ),
    )
}

fn rerun_is_byte_identical() -> (bool, String) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut maps = Vec::new();
    for (i, dir) in dirs.iter().enumerate() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds = vec![3, 4];
        cfg.episode_loop.max_episode_num = 300;
        cfg.output_dir = dir.path().to_path_buf();
        cli::cmd_train(&cfg, i + 1, false).unwrap();
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut files = v["files"].as_object().unwrap().clone();
        // the resolved config embeds the output path
        files.remove("config.json");
        maps.push(files);
    }
    let csvs = maps[0].keys().filter(|k| k.ends_with(".csv")).count();
    let mismatched: Vec<&String> = maps[0].keys().filter(|k| maps[0].get(*k) != maps[1].get(*k)).collect();
    let ok = maps[0] == maps[1] && csvs > 0;
    (
        ok,
        format!("{} artifacts ({csvs} CSVs) hashed on two runs with 1 and 2 workers, {} mismatched", maps[0].len(), mismatched.len()),
    )
}

fn heavy_runs() -> (Vec<RunOutput>, Vec<RunOutput>, Vec<RunOutput>, f64) {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut base = ExperimentConfig::default();
    base.seeds = (0..SEEDS).collect();
    base.episode_loop.max_episode_num = EPISODES;
    base.final_window = FINAL_WINDOW;
    let start = Instant::now();
    let alt = cli::with_mode(&base, ExplorationMode::Alternating);
    let alt_us = cli::run_seeds(&cli::with_undersampling(&alt, true), jobs).unwrap();
    let per_config = start.elapsed().as_secs_f64();
    let joint_us = cli::run_seeds(&cli::with_undersampling(&cli::with_mode(&base, ExplorationMode::Joint), true), jobs).unwrap();
    let alt_plain = cli::run_seeds(&cli::with_undersampling(&alt, false), jobs).unwrap();
    (alt_us, joint_us, alt_plain, per_config)
}

fn main() -> ExitCode {
    let mut report = Report {
        hard_failures: 0,
        soft_failures: 0,
    };
    let (ok, d) = oracle_sequence_score();
    report.line(true, "oracle-310", ok, d);
    let (ok, d) = q_learning_matches_value_iteration();
    report.line(true, "q-vs-value-iteration", ok, d);
    let (ok, d) = gradient_checks();
    report.line(true, "gradient-check", ok, d);
    let (ok, d) = joint_probability();
    report.line(true, "joint-probability", ok, d);
    let (ok, d) = undersampling_properties();
    report.line(true, "undersampling-properties", ok, d);
    let (ok, d) = rerun_is_byte_identical();
    report.line(true, "byte-identical-rerun", ok, d);

    if std::env::var_os("SKILLSEQ_ACCEPTANCE_SKIP_TRAINING").is_some() {
        println!("SKIP learning criteria (SKILLSEQ_ACCEPTANCE_SKIP_TRAINING is set)");
        return if report.hard_failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE };
    }
    let (alt_us, joint_us, alt_plain, secs) = heavy_runs();

    let summaries: Vec<_> = alt_us.iter().map(|r| cli::summarize(r, FINAL_WINDOW)).collect();
    for k in 0..4 {
        let med = median(&summaries.iter().map(|s| s.final_success[k]).collect::<Vec<_>>());
        let per_seed: Vec<String> = summaries.iter().map(|s| format!("{:.3}", s.final_success[k])).collect();
        report.line(
            false,
            &format!("alternating-success-stage{}", k + 1),
            med >= STAGE_FLOORS[k],
            format!("median last-{FINAL_WINDOW} success {med:.3} (floor {}) per seed [{}]", STAGE_FLOORS[k], per_seed.join(", ")),
        );
    }
    report.line(
        false,
        "runtime",
        secs < 1800.0,
        format!("{SEEDS} seeds x {EPISODES} episodes in {secs:.0}s (target < 1800s)"),
    );

    let cmp = cli::compare_exploration(&joint_us, &alt_us);
    let wins = cmp.alternating_wins();
    let joint_med = cli::ExplorationComparison::median_count(&cmp.joint, 3);
    let alt_med = cli::ExplorationComparison::median_count(&cmp.alternating, 3);
    report.line(
        false,
        "alternating-beats-joint",
        wins >= 8,
        format!("alternating stage-4 count > joint in {wins}/{SEEDS} seeds (need >= 8); joint {:?} alternating {:?}", cmp.joint.iter().map(|c| c[3]).collect::<Vec<_>>(), cmp.alternating.iter().map(|c| c[3]).collect::<Vec<_>>()),
    );
    report.line(
        false,
        "joint-stage4-rare",
        joint_med < 5.0,
        format!("joint median stage-4 count {joint_med} (need < 5; alternating median {alt_med})"),
    );

    let abl = cli::ablation(&alt_us, &alt_plain, FINAL_WINDOW);
    report.line(
        false,
        "undersampling-helps",
        abl.median_with() >= abl.median_without(),
        format!(
            "median final-window reward {:.2} with vs {:.2} without (difference {:.2}, paired effect size {:.3})",
            abl.median_with(),
            abl.median_without(),
            abl.median_with() - abl.median_without(),
            abl.effect_size()
        ),
    );

    println!(
        "summary: {} deterministic failures, {} learning-criterion failures",
        report.hard_failures, report.soft_failures
    );
    if report.hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
